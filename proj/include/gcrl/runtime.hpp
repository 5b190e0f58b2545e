#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gcrl {

/// Keep large activation buffers on the heap free lists instead of cycling
/// them through mmap/munmap; training reallocates megabyte-sized temporaries
/// every step and the page-fault churn otherwise dominates the GEMM time.
inline void tune_allocator_for_training() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

} // namespace gcrl
