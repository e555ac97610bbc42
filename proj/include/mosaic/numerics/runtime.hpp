#pragma once

namespace mosaic {

// Keeps freed blocks in the heap instead of returning them to the kernel.
// Attention buffers are large and short-lived, and without this every call
// pays for fresh page faults. No-op outside glibc.
void tune_allocator();

}  // namespace mosaic
