#pragma once

// Process-level helpers: allocator tuning and memory reporting (Linux/glibc).

#include <fstream>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ffino {

/// Keeps large activation buffers in the heap instead of fresh mmap regions,
/// so repeated training steps reuse already-faulted pages.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

/// Peak resident set size in KiB (VmHWM), or 0 when unavailable.
inline std::size_t peak_rss_kib() {
  std::ifstream f("/proc/self/status");
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("VmHWM:", 0) == 0) return std::stoul(line.substr(6));
  }
  return 0;
}

}  // namespace ffino
