#pragma once

namespace mixent {

// Set the number of BLAS threads. The library defaults to 1 so that results
// are bit-reproducible; see src/blas_setup.cpp for the rationale.
void set_blas_threads(int n);

}  // namespace mixent
