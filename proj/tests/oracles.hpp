#pragma once

// Test-only reference implementations kept independent of the library's
// production code paths.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gpvad/metrics.hpp"
#include "gpvad/postprocess.hpp"

namespace oracles {

// Maximum bipartite matching (Kuhn's augmenting paths) over the same
// segment-compatibility graph the greedy matcher uses.
inline std::size_t max_bipartite_tp(const std::vector<gpvad::SpeechSegment>& reference,
                                    const std::vector<gpvad::SpeechSegment>& predicted,
                                    double collar_s = 0.2, double dur_tolerance = 0.2) {
  const std::size_t nr = reference.size();
  const std::size_t np = predicted.size();
  std::vector<std::vector<std::size_t>> adj(nr);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < np; ++j)
      if (gpvad::segments_compatible(reference[i], predicted[j], collar_s, dur_tolerance))
        adj[i].push_back(j);

  std::vector<int> match_pred(np, -1);
  std::vector<bool> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t i) -> bool {
    for (std::size_t j : adj[i]) {
      if (visited[j]) continue;
      visited[j] = true;
      if (match_pred[j] < 0 || augment(static_cast<std::size_t>(match_pred[j]))) {
        match_pred[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  std::size_t matched = 0;
  for (std::size_t i = 0; i < nr; ++i) {
    visited.assign(np, false);
    if (augment(i)) ++matched;
  }
  return matched;
}

// Naive single-threshold binarization, used to sandwich the hysteresis output.
inline std::vector<std::uint8_t> simple_threshold(const std::vector<float>& probs,
                                                  double phi) {
  std::vector<std::uint8_t> out(probs.size(), 0);
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= phi ? 1 : 0;
  return out;
}

}  // namespace oracles
