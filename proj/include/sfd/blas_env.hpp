#pragma once

extern "C" void openblas_set_num_threads(int);

namespace sfd::detail {

/// Pins BLAS to one thread before any gemm runs. OpenBLAS output is not
/// bit-stable across thread counts, and reproducibility independent of the
/// host's thread configuration is part of the library contract. Called at
/// every kernel entry; it only writes a library variable.
inline void pin_blas_single_thread() { openblas_set_num_threads(1); }

}  // namespace sfd::detail
