#pragma once

namespace pupilfield {

/// Number of threads the parallel kernels may use. Controlled by the
/// environment variable PUPILFIELD_THREADS (0 or unset = hardware default).
int thread_budget();

}  // namespace pupilfield
