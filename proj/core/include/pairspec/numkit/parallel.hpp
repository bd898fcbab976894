// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace pairspec::numkit {

/// Runs body(0) ... body(n-1) on up to `threads` workers (0 means hardware
/// concurrency). Indices are handed out in order; if any call throws, the
/// exception from the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

/// Worker count from PAIRSPEC_THREADS, or `fallback` when unset or invalid.
std::size_t threads_from_env(std::size_t fallback);

}  // namespace pairspec::numkit
