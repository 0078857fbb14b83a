#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

namespace oracle {

struct naive_merge {
  std::size_t left;
  std::size_t right;
  double height;
  std::size_t size;
};

// Textbook agglomeration on a full square matrix: scan every active pair in
// ascending (left, right) id order, merge the first minimum, then update all
// distances with the Lance-Williams Ward recurrence.
inline std::vector<naive_merge> naive_ward(std::size_t n,
                                           std::vector<std::vector<double>> d) {
  std::map<std::size_t, std::size_t> size;  // active cluster id -> size
  std::map<std::size_t, std::size_t> slot;  // active cluster id -> matrix row
  for (std::size_t i = 0; i < n; ++i) {
    size[i] = 1;
    slot[i] = i;
  }
  std::vector<naive_merge> out;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    auto best = std::numeric_limits<double>::infinity();
    std::size_t bl = 0;
    std::size_t br = 0;
    for (auto const& [i, si] : slot) {
      for (auto const& [j, sj] : slot) {
        if (j <= i) {
          continue;
        }
        if (d[si][sj] < best) {
          best = d[si][sj];
          bl = i;
          br = j;
        }
      }
    }
    auto const s = slot[bl];
    auto const t = slot[br];
    auto const ns = static_cast<double>(size[bl]);
    auto const nt = static_cast<double>(size[br]);
    for (auto const& [v, sv] : slot) {
      if (v == bl || v == br) {
        continue;
      }
      auto const nv = static_cast<double>(size[v]);
      auto const x = ((nv + ns) * d[sv][s] * d[sv][s] +
                      (nv + nt) * d[sv][t] * d[sv][t] - nv * best * best) /
                     (nv + ns + nt);
      auto const nd = std::sqrt(x > 0 ? x : 0.0);
      d[sv][s] = nd;
      d[s][sv] = nd;
    }
    auto const id = n + step;
    out.push_back({bl, br, best, size[bl] + size[br]});
    size[id] = size[bl] + size[br];
    slot[id] = s;  // reuse the left row
    size.erase(bl);
    size.erase(br);
    slot.erase(bl);
    slot.erase(br);
  }
  return out;
}

}  // namespace oracle
