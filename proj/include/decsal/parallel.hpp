#pragma once

#include <cstdint>
#include <functional>

namespace decsal {

// Worker cap: DECSAL_THREADS when set, hardware concurrency otherwise.
std::size_t worker_count();

// Static index partition over `count` items; results must be written to
// per-index slots so parallel and serial runs produce identical output.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// Stateless mix for independent per-(stream, item) seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t item);

}  // namespace decsal
