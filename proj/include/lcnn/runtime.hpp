#pragma once

namespace lcnn {

// Keeps freed tensor buffers in the heap instead of returning them to the OS
// after every layer. Training allocates and frees multi-megabyte activations
// per step; without this most of that time goes to page faults. No-op outside
// glibc.
void tune_allocator();

}  // namespace lcnn
