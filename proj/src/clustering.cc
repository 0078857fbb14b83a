#include "delayprof/clustering.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "delayprof/io.h"

namespace fs = std::filesystem;

namespace delayprof {

double ward_update(double d_vs, double d_vt, double d_st, double n_v,
                   double n_s, double n_t) {
  auto const sq = ((n_v + n_s) * d_vs * d_vs + (n_v + n_t) * d_vt * d_vt -
                   n_v * d_st * d_st) /
                  (n_v + n_s + n_t);
  return std::sqrt(std::max(sq, 0.0));
}

dendrogram ward_linkage(condensed_distance_matrix const& dist) {
  auto const n = dist.n;
  if (n < 2) {
    throw clustering_error("ward_linkage: need at least 2 observations");
  }
  if (dist.values.size() != n * (n - 1) / 2) {
    throw clustering_error("ward_linkage: condensed matrix has wrong size");
  }

  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      auto const v = dist.values[condensed_distance_matrix::index(n, i, j)];
      if (!std::isfinite(v) || v < 0.0) {
        throw clustering_error("ward_linkage: invalid distance between " +
                               std::to_string(i) + " and " + std::to_string(j));
      }
      d[i * n + j] = v;
      d[j * n + i] = v;
    }
  }

  std::vector<std::size_t> id(n);
  std::iota(begin(id), end(id), 0);
  std::vector<double> size(n, 1.0);
  std::vector<std::uint8_t> active(n, 1);
  std::vector<std::size_t> nn(n, 0);
  std::vector<double> nn_dist(n, 0.0);

  // Nearest active neighbor of slot i under the key (distance, id).
  auto const refresh = [&](std::size_t i) {
    auto best = std::numeric_limits<double>::infinity();
    auto best_slot = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || active[j] == 0U) {
        continue;
      }
      auto const v = d[i * n + j];
      if (v < best || (v == best && best_slot != n && id[j] < id[best_slot])) {
        best = v;
        best_slot = j;
      }
    }
    nn[i] = best_slot;
    nn_dist[i] = best;
  };
  for (std::size_t i = 0; i < n; ++i) {
    refresh(i);
  }

  dendrogram out;
  out.n_leaves = n;
  out.labels = dist.labels;
  out.merges.reserve(n - 1);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    // The slot holding the lexicographically smallest (d, lo id, hi id) pair
    // is found through each slot's cached neighbor.
    auto best_slot = n;
    auto best_key = std::tuple{std::numeric_limits<double>::infinity(),
                               std::numeric_limits<std::size_t>::max(),
                               std::numeric_limits<std::size_t>::max()};
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] == 0U) {
        continue;
      }
      auto const a = id[i];
      auto const b = id[nn[i]];
      auto const key = std::tuple{nn_dist[i], std::min(a, b), std::max(a, b)};
      if (best_slot == n || key < best_key) {
        best_key = key;
        best_slot = i;
      }
    }

    auto const s = best_slot;
    auto const t = nn[s];
    auto const d_st = d[s * n + t];
    auto const n_s = size[s];
    auto const n_t = size[t];

    out.merges.push_back(merge{.left = std::min(id[s], id[t]),
                               .right = std::max(id[s], id[t]),
                               .height = d_st,
                               .new_size = static_cast<std::size_t>(n_s + n_t)});

    active[t] = 0;
    id[s] = n + step;
    size[s] = n_s + n_t;
    for (std::size_t v = 0; v < n; ++v) {
      if (active[v] == 0U || v == s) {
        continue;
      }
      auto const nd =
          ward_update(d[v * n + s], d[v * n + t], d_st, size[v], n_s, n_t);
      d[v * n + s] = nd;
      d[s * n + v] = nd;
    }

    for (std::size_t v = 0; v < n; ++v) {
      if (active[v] == 0U || v == s) {
        continue;
      }
      if (nn[v] == s || nn[v] == t) {
        refresh(v);
      } else if (d[v * n + s] < nn_dist[v]) {
        // the new cluster has the largest id, so ties keep the old neighbor
        nn[v] = s;
        nn_dist[v] = d[v * n + s];
      }
    }
    if (step + 2 < n) {
      refresh(s);
    }
  }

  for (std::size_t i = 1; i < out.merges.size(); ++i) {
    if (out.merges[i].height < out.merges[i - 1].height) {
      out.inversions.push_back(i);
    }
  }
  out.leaf_order = leaf_order(n, out.merges);
  return out;
}

std::vector<std::size_t> leaf_order(std::size_t n_leaves,
                                    std::span<merge const> merges) {
  std::vector<std::size_t> order;
  if (n_leaves == 0) {
    return order;
  }
  if (merges.size() + 1 != n_leaves) {
    throw clustering_error("leaf_order: expected n-1 merges");
  }
  order.reserve(n_leaves);
  std::vector<std::size_t> stack{n_leaves + merges.size() - 1};
  if (merges.empty()) {
    stack = {0};
  }
  while (!stack.empty()) {
    auto const c = stack.back();
    stack.pop_back();
    if (c < n_leaves) {
      order.push_back(c);
      continue;
    }
    auto const& m = merges[c - n_leaves];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return order;
}

std::vector<std::size_t> cut(dendrogram const& d, std::size_t k) {
  auto const n = d.n_leaves;
  if (k < 1 || k > n) {
    throw clustering_error("cut: k=" + std::to_string(k) +
                           " outside [1, " + std::to_string(n) + "]");
  }
  // union-find over leaves, applying the first n-k merges
  std::vector<std::size_t> uf(n);
  std::iota(begin(uf), end(uf), 0);
  auto const find = [&](std::size_t x) {
    while (uf[x] != x) {
      uf[x] = uf[uf[x]];
      x = uf[x];
    }
    return x;
  };
  std::vector<std::size_t> rep(n + d.merges.size());
  std::iota(begin(rep), begin(rep) + static_cast<std::ptrdiff_t>(n), 0);
  for (std::size_t s = 0; s + k < n; ++s) {
    auto const& m = d.merges[s];
    auto const a = find(rep[m.left]);
    auto const b = find(rep[m.right]);
    uf[std::max(a, b)] = std::min(a, b);
    rep[n + s] = std::min(a, b);
  }

  std::vector<std::size_t> labels(n, 0);
  std::map<std::size_t, std::size_t> root_label;
  auto const& order = d.leaf_order.empty() ? leaf_order(n, d.merges) : d.leaf_order;
  for (auto const leaf : order) {
    auto const r = find(leaf);
    auto const [it, inserted] = root_label.emplace(r, root_label.size() + 1);
    labels[leaf] = it->second;
  }
  return labels;
}

double adjusted_rand_index(std::span<std::size_t const> a,
                           std::span<std::size_t const> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("adjusted_rand_index: size mismatch");
  }
  auto const n = static_cast<double>(a.size());
  if (a.size() < 2) {
    return 1.0;
  }
  std::map<std::pair<std::size_t, std::size_t>, double> contingency;
  std::map<std::size_t, double> ra;
  std::map<std::size_t, double> rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    contingency[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto const comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (auto const& [k, v] : contingency) {
    index += comb2(v);
  }
  double sum_a = 0.0;
  for (auto const& [k, v] : ra) {
    sum_a += comb2(v);
  }
  double sum_b = 0.0;
  for (auto const& [k, v] : rb) {
    sum_b += comb2(v);
  }
  auto const expected = sum_a * sum_b / comb2(n);
  auto const max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) {
    return 1.0;
  }
  return (index - expected) / (max_index - expected);
}

char edge_summary::mode() const {
  if (bus_events > 0 && tram_events > 0) {
    return 'm';
  }
  return tram_events > 0 ? 't' : 'b';
}

std::vector<edge_summary> summarize_edges(
    std::span<edge_observations const> groups, binning_scheme const& scheme) {
  std::vector<edge_summary> out;
  out.reserve(groups.size());
  for (auto const& g : groups) {
    edge_summary s;
    s.edge = g.edge;
    s.delay_bin_counts.assign(scheme.delay_bins(), 0);
    for (auto const& e : g.events) {
      (e.type == vehicle_type::bus ? s.bus_events : s.tram_events) += 1;
      ++s.delay_bin_counts[delay_bin_index_ms(e.delay_delta_ms, scheme)];
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> cluster_profile::dominant_bands(std::size_t count) const {
  std::vector<std::size_t> idx(band_likelihood.size());
  std::iota(begin(idx), end(idx), 0);
  std::stable_sort(begin(idx), end(idx), [&](auto x, auto y) {
    return band_likelihood[x] > band_likelihood[y];
  });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

std::vector<cluster_profile> cluster_profiles(
    std::span<std::size_t const> assignment,
    std::span<feature_matrix const> features,
    std::span<edge_summary const> summaries, binning_scheme const& scheme) {
  if (assignment.size() != features.size()) {
    throw clustering_error("cluster_profiles: " +
                           std::to_string(assignment.size()) +
                           " assignments for " +
                           std::to_string(features.size()) + " features");
  }
  std::map<edge_key, edge_summary const*> by_edge;
  for (auto const& s : summaries) {
    by_edge[s.edge] = &s;
  }
  auto const center = scheme.no_change_bin();

  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    members[assignment[i]].push_back(i);
  }

  std::vector<cluster_profile> out;
  for (auto const& [label, idx] : members) {
    cluster_profile p;
    p.label = label;
    p.rows = features[idx.front()].rows;
    p.cols = features[idx.front()].cols;
    p.mean_matrix.assign(p.rows * p.cols, 0.0);
    for (auto const i : idx) {
      auto const& f = features[i];
      if (f.rows != p.rows || f.cols != p.cols) {
        throw clustering_error("cluster_profiles: mixed matrix shapes");
      }
      p.members.push_back(f.edge);
      for (std::size_t c = 0; c < f.values.size(); ++c) {
        p.mean_matrix[c] += f.values[c];
      }
    }
    auto const count = static_cast<double>(idx.size());
    for (auto& v : p.mean_matrix) {
      v /= count;
    }

    p.band_likelihood.assign(p.rows, 0.0);
    for (std::size_t r = 0; r < p.rows; ++r) {
      for (std::size_t c = 0; c < p.cols; ++c) {
        p.band_likelihood[r] += p.mean_matrix[r * p.cols + c];
      }
    }
    for (std::size_t r = 0; r < p.rows; ++r) {
      (r == center ? p.p_no_change
                   : (r < center ? p.p_decrease : p.p_increase)) +=
          p.band_likelihood[r];
    }

    if (!summaries.empty()) {
      mode_breakdown mb;
      std::vector<double> pooled(p.rows, 0.0);
      double pooled_total = 0.0;
      for (auto const i : idx) {
        auto const it = by_edge.find(features[i].edge);
        if (it == end(by_edge)) {
          throw clustering_error("cluster_profiles: no event summary for edge " +
                                 features[i].edge.to_string());
        }
        auto const& s = *it->second;
        mb.bus_events += s.bus_events;
        mb.tram_events += s.tram_events;
        switch (s.mode()) {
          case 'b': ++mb.bus_edges; break;
          case 't': ++mb.tram_edges; break;
          default: ++mb.mixed_edges; break;
        }
        for (std::size_t r = 0; r < p.rows && r < s.delay_bin_counts.size(); ++r) {
          pooled[r] += static_cast<double>(s.delay_bin_counts[r]);
          pooled_total += static_cast<double>(s.delay_bin_counts[r]);
        }
      }
      p.modes = mb;
      if (pooled_total > 0.0) {
        double no_change = 0.0;
        double inc = 0.0;
        double dec = 0.0;
        for (std::size_t r = 0; r < p.rows; ++r) {
          (r == center ? no_change : (r < center ? dec : inc)) += pooled[r];
        }
        p.pooled_no_change = no_change / pooled_total;
        p.pooled_increase = inc / pooled_total;
        p.pooled_decrease = dec / pooled_total;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_dendrogram(fs::path const& path, dendrogram const& d) {
  std::string out = "# n_leaves," + std::to_string(d.n_leaves) + "\n";
  out += "step,left,right,height,new_size,inversion\n";
  std::size_t inv = 0;
  for (std::size_t s = 0; s < d.merges.size(); ++s) {
    auto const& m = d.merges[s];
    auto const is_inv = inv < d.inversions.size() && d.inversions[inv] == s;
    if (is_inv) {
      ++inv;
    }
    out += std::to_string(s) + "," + std::to_string(m.left) + "," +
           std::to_string(m.right) + "," + format_double(m.height) + "," +
           std::to_string(m.new_size) + "," + (is_inv ? "1" : "0") + "\n";
  }
  out += "# leaves\nposition,leaf,stop_from,stop_to\n";
  for (std::size_t p = 0; p < d.leaf_order.size(); ++p) {
    auto const leaf = d.leaf_order[p];
    out += std::to_string(p) + "," + std::to_string(leaf) + "," +
           csv_escape(d.labels.at(leaf).stop_from) + "," +
           csv_escape(d.labels.at(leaf).stop_to) + "\n";
  }
  write_file(path, out);
}

dendrogram read_dendrogram(fs::path const& path) {
  auto const content = read_file(path);
  dendrogram d;
  enum { header, merges, leaves } section = header;
  std::vector<std::pair<std::size_t, edge_key>> leaf_rows;
  for (auto const& raw : split(content, '\n')) {
    auto const line = trim(raw);
    if (line.empty()) {
      continue;
    }
    if (line.starts_with("# n_leaves,")) {
      d.n_leaves = static_cast<std::size_t>(parse_int(line.substr(11)));
      section = merges;
      continue;
    }
    if (line == "# leaves") {
      section = leaves;
      continue;
    }
    if (line.starts_with("step,") || line.starts_with("position,")) {
      continue;
    }
    auto const f = split_csv_line(line);
    if (section == merges && f.size() == 6) {
      d.merges.push_back(merge{.left = static_cast<std::size_t>(parse_int(f[1])),
                               .right = static_cast<std::size_t>(parse_int(f[2])),
                               .height = parse_double(f[3]),
                               .new_size = static_cast<std::size_t>(parse_int(f[4]))});
      if (f[5] == "1") {
        d.inversions.push_back(d.merges.size() - 1);
      }
    } else if (section == leaves && f.size() == 4) {
      leaf_rows.emplace_back(static_cast<std::size_t>(parse_int(f[1])),
                             edge_key{f[2], f[3]});
    } else {
      throw io_error(path.string() + ": malformed dendrogram line");
    }
  }
  d.labels.resize(d.n_leaves);
  for (auto const& [leaf, key] : leaf_rows) {
    d.leaf_order.push_back(leaf);
    d.labels.at(leaf) = key;
  }
  return d;
}

}  // namespace delayprof
