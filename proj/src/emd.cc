#include "delayprof/emd.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <thread>

#include "delayprof/io.h"

namespace fs = std::filesystem;

namespace delayprof {

void ground_config::validate() const {
  if (!(delay_scale > 0.0) || !std::isfinite(delay_scale)) {
    throw std::invalid_argument("delay_scale must be positive");
  }
  if (!(surrogate_offset >= 0.0) || !std::isfinite(surrogate_offset)) {
    throw std::invalid_argument("surrogate_offset must be non-negative");
  }
  if (!(time_unit_hours > 0.0) || !std::isfinite(time_unit_hours)) {
    throw std::invalid_argument("time_unit_hours must be positive");
  }
}

std::vector<bin_coordinate> bin_coordinates(binning_scheme const& scheme,
                                            ground_config const& config) {
  scheme.validate();
  config.validate();
  auto const& b = scheme.delay_boundaries;
  auto const extend =
      config.rule == surrogate_rule::offset ? config.surrogate_offset : 0.0;

  std::vector<double> delay_mid(scheme.delay_bins());
  for (std::size_t i = 0; i < delay_mid.size(); ++i) {
    if (i == 0) {
      delay_mid[i] = b.front() - extend;
    } else if (i == b.size()) {
      delay_mid[i] = b.back() + extend;
    } else {
      delay_mid[i] = 0.5 * (b[i - 1] + b[i]);
    }
  }

  std::vector<bin_coordinate> coords;
  coords.reserve(scheme.cells());
  for (std::size_t d = 0; d < scheme.delay_bins(); ++d) {
    for (std::size_t t = 0; t < scheme.time_bins(); ++t) {
      auto const hour_mid =
          static_cast<double>(scheme.first_hour) + static_cast<double>(t) + 0.5;
      coords.push_back({hour_mid / config.time_unit_hours,
                        delay_mid[d] / config.delay_scale});
    }
  }
  return coords;
}

ground_distance_matrix::ground_distance_matrix(std::size_t n,
                                               std::vector<double> entries)
    : n_{n}, d_{std::move(entries)} {
  if (d_.size() != n * n) {
    throw std::invalid_argument("ground_distance_matrix: size mismatch");
  }
}

ground_distance_matrix ground_distances(std::span<bin_coordinate const> coords) {
  auto const n = coords.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      auto const dt = coords[i].time_mid - coords[j].time_mid;
      auto const dd = coords[i].delay_mid_scaled - coords[j].delay_mid_scaled;
      auto const v = std::sqrt(dt * dt + dd * dd);
      d[i * n + j] = v;
      d[j * n + i] = v;
    }
  }
  return ground_distance_matrix{n, std::move(d)};
}

// --- network simplex --------------------------------------------------------
//
// Nodes 0..m-1 are sources, m..m+n-1 sinks, m+n the artificial root. Arc
// a < m*n runs from source a/n to sink m + a%n. Arc m*n + u joins node u and
// the root in the direction its supply sign dictates. The spanning tree is
// kept strongly feasible: the leaving arc is the last blocking arc met when
// walking the pivot cycle from its apex in the direction of the entering arc,
// which rules out cycling under degeneracy.

double emd_solver::run(std::size_t m, std::size_t n) {
  pivots_ = 0;
  auto const node_count = m + n;
  auto const root = static_cast<std::int32_t>(node_count);
  auto const real_arcs = m * n;
  auto const total_arcs = real_arcs + node_count;

  double max_cost = 0.0;
  for (std::size_t a = 0; a < real_arcs; ++a) {
    max_cost = std::max(max_cost, cost_[a]);
  }
  auto const art_cost = (max_cost + 1.0) * static_cast<double>(node_count + 1);
  auto const eps = std::max(1e-13, 1e-14 * art_cost);

  auto const source = [&](std::size_t a) -> std::int32_t {
    if (a < real_arcs) {
      return static_cast<std::int32_t>(a / n);
    }
    auto const u = a - real_arcs;
    return supply_[u] >= 0.0 ? static_cast<std::int32_t>(u) : root;
  };
  auto const target = [&](std::size_t a) -> std::int32_t {
    if (a < real_arcs) {
      return static_cast<std::int32_t>(m + a % n);
    }
    auto const u = a - real_arcs;
    return supply_[u] >= 0.0 ? root : static_cast<std::int32_t>(u);
  };
  auto const arc_cost = [&](std::size_t a) {
    return a < real_arcs ? cost_[a] : art_cost;
  };

  flow_.assign(total_arcs, 0.0);
  in_tree_.assign(total_arcs, 0);
  tree_arcs_.resize(node_count);
  for (std::size_t u = 0; u < node_count; ++u) {
    auto const a = real_arcs + u;
    flow_[a] = std::abs(supply_[u]);
    in_tree_[a] = 1;
    tree_arcs_[u] = static_cast<std::uint32_t>(a);
  }

  auto const all_nodes = node_count + 1;
  pi_.resize(all_nodes);
  parent_.resize(all_nodes);
  pred_.resize(all_nodes);
  pred_up_.resize(all_nodes);
  depth_.resize(all_nodes);
  if (tree_adj_.size() < all_nodes) {
    tree_adj_.resize(all_nodes);
  }
  for (std::size_t i = 0; i < all_nodes; ++i) {
    tree_adj_[i].clear();
  }
  for (auto const a : tree_arcs_) {
    tree_adj_[static_cast<std::size_t>(source(a))].push_back(a);
    tree_adj_[static_cast<std::size_t>(target(a))].push_back(a);
  }
  stack_.reserve(all_nodes);

  // Re-derive parent, depth and potential below `top`, whose own entries
  // are already correct.
  auto const relabel_below = [&](std::int32_t top) {
    stack_.clear();
    stack_.push_back(top);
    while (!stack_.empty()) {
      auto const x = stack_.back();
      stack_.pop_back();
      auto const xs = static_cast<std::size_t>(x);
      for (auto const a : tree_adj_[xs]) {
        if (static_cast<std::int32_t>(a) == pred_[xs]) {
          continue;
        }
        auto const s = source(a);
        auto const y = s == x ? target(a) : s;
        auto const ys = static_cast<std::size_t>(y);
        parent_[ys] = x;
        pred_[ys] = static_cast<std::int32_t>(a);
        pred_up_[ys] = static_cast<std::uint8_t>(s == y);
        depth_[ys] = depth_[xs] + 1;
        pi_[ys] = s == y ? pi_[xs] - arc_cost(a) : pi_[xs] + arc_cost(a);
        stack_.push_back(y);
      }
    }
  };

  parent_[static_cast<std::size_t>(root)] = -1;
  pred_[static_cast<std::size_t>(root)] = -1;
  depth_[static_cast<std::size_t>(root)] = 0;
  pi_[static_cast<std::size_t>(root)] = 0.0;
  relabel_below(root);

  auto const block_size = std::max<std::size_t>(
      10, static_cast<std::size_t>(std::sqrt(static_cast<double>(real_arcs))));
  std::size_t next_arc = 0;
  auto const max_pivots = 50 * total_arcs + 10000;

  while (true) {
    // block search pricing
    std::int64_t in_arc = -1;
    double best = -eps;
    std::size_t cnt = block_size;
    std::size_t scanned = 0;
    std::size_t e = next_arc;
    while (scanned < real_arcs) {
      if (in_tree_[e] == 0U) {
        auto const rc = cost_[e] + pi_[e / n] - pi_[m + e % n];
        if (rc < best) {
          best = rc;
          in_arc = static_cast<std::int64_t>(e);
        }
      }
      ++scanned;
      if (++e == real_arcs) {
        e = 0;
      }
      if (--cnt == 0) {
        if (in_arc >= 0) {
          break;
        }
        cnt = block_size;
      }
    }
    if (in_arc < 0) {
      break;
    }
    next_arc = e;

    if (++pivots_ > max_pivots) {
      throw emd_error("emd: pivot limit exceeded");
    }

    auto const in = static_cast<std::size_t>(in_arc);
    auto const first = source(in);
    auto const second = target(in);

    auto u = first;
    auto v = second;
    while (u != v) {
      if (depth_[static_cast<std::size_t>(u)] >= depth_[static_cast<std::size_t>(v)]) {
        u = parent_[static_cast<std::size_t>(u)];
      } else {
        v = parent_[static_cast<std::size_t>(v)];
      }
    }
    auto const join = u;

    auto delta = std::numeric_limits<double>::infinity();
    std::int32_t u_out = -1;
    bool out_on_first = false;
    for (auto w = first; w != join; w = parent_[static_cast<std::size_t>(w)]) {
      auto const ws = static_cast<std::size_t>(w);
      if (pred_up_[ws] != 0U) {
        auto const d = flow_[static_cast<std::size_t>(pred_[ws])];
        if (d < delta) {
          delta = d;
          u_out = w;
          out_on_first = true;
        }
      }
    }
    for (auto w = second; w != join; w = parent_[static_cast<std::size_t>(w)]) {
      auto const ws = static_cast<std::size_t>(w);
      if (pred_up_[ws] == 0U) {
        auto const d = flow_[static_cast<std::size_t>(pred_[ws])];
        if (d <= delta) {
          delta = d;
          u_out = w;
          out_on_first = false;
        }
      }
    }
    if (u_out < 0) {
      throw emd_error("emd: unbounded pivot cycle");
    }
    delta = std::max(delta, 0.0);

    if (delta > 0.0) {
      flow_[in] += delta;
      for (auto w = first; w != join; w = parent_[static_cast<std::size_t>(w)]) {
        auto const ws = static_cast<std::size_t>(w);
        auto& f = flow_[static_cast<std::size_t>(pred_[ws])];
        f = pred_up_[ws] != 0U ? std::max(0.0, f - delta) : f + delta;
      }
      for (auto w = second; w != join; w = parent_[static_cast<std::size_t>(w)]) {
        auto const ws = static_cast<std::size_t>(w);
        auto& f = flow_[static_cast<std::size_t>(pred_[ws])];
        f = pred_up_[ws] != 0U ? f + delta : std::max(0.0, f - delta);
      }
    }
    auto const out = static_cast<std::uint32_t>(pred_[static_cast<std::size_t>(u_out)]);
    flow_[out] = 0.0;
    in_tree_[out] = 0;
    in_tree_[in] = 1;
    for (auto const x : {source(out), target(out)}) {
      auto& adj = tree_adj_[static_cast<std::size_t>(x)];
      adj.erase(std::find(begin(adj), end(adj), out));
    }
    tree_adj_[static_cast<std::size_t>(first)].push_back(static_cast<std::uint32_t>(in));
    tree_adj_[static_cast<std::size_t>(second)].push_back(static_cast<std::uint32_t>(in));

    // The subtree under u_out hangs from the entering arc now.
    auto const low = out_on_first ? first : second;
    auto const high = out_on_first ? second : first;
    auto const ls = static_cast<std::size_t>(low);
    auto const hs = static_cast<std::size_t>(high);
    parent_[ls] = high;
    pred_[ls] = static_cast<std::int32_t>(in);
    pred_up_[ls] = static_cast<std::uint8_t>(first == low);
    depth_[ls] = depth_[hs] + 1;
    pi_[ls] = first == low ? pi_[hs] - arc_cost(in) : pi_[hs] + arc_cost(in);
    relabel_below(low);
  }

  double total = 0.0;
  for (std::size_t a = 0; a < real_arcs; ++a) {
    if (in_tree_[a] != 0U && flow_[a] > 0.0) {
      total += flow_[a] * cost_[a];
    }
  }
  return total;
}

namespace {

double checked_sum(std::span<double const> x, char const* which) {
  double s = 0.0;
  for (auto const v : x) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw emd_error(std::string{"emd: "} + which +
                      " has a negative or non-finite entry");
    }
    s += v;
  }
  return s;
}

}  // namespace

double emd_solver::solve(std::span<double const> a, std::span<double const> b,
                         ground_distance_matrix const& ground) {
  if (a.size() != ground.size() || b.size() != ground.size()) {
    throw emd_error("emd: histogram size does not match the ground matrix");
  }
  auto const sa = checked_sum(a, "first histogram");
  auto const sb = checked_sum(b, "second histogram");
  if (std::abs(sa - 1.0) > mass_tolerance || std::abs(sb - 1.0) > mass_tolerance) {
    throw emd_error("emd: histograms must each carry unit mass (got " +
                    format_double(sa) + " and " + format_double(sb) + ")");
  }
  if (std::equal(begin(a), end(a), begin(b))) {
    return 0.0;
  }
  // Orient the pair canonically so emd(a, b) and emd(b, a) solve the very
  // same instance and agree bit for bit on a symmetric ground matrix.
  if (std::lexicographical_compare(begin(b), end(b), begin(a), end(a))) {
    std::swap(a, b);
  }

  rows_.clear();
  cols_.clear();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) {
      rows_.push_back(static_cast<std::uint32_t>(i));
    }
    if (b[i] > 0.0) {
      cols_.push_back(static_cast<std::uint32_t>(i));
    }
  }
  auto const m = rows_.size();
  auto const n = cols_.size();
  supply_.resize(m + n);
  for (std::size_t p = 0; p < m; ++p) {
    supply_[p] = a[rows_[p]];
  }
  for (std::size_t q = 0; q < n; ++q) {
    supply_[m + q] = -b[cols_[q]];
  }
  cost_.resize(m * n);
  for (std::size_t p = 0; p < m; ++p) {
    auto const row = ground.row(rows_[p]);
    for (std::size_t q = 0; q < n; ++q) {
      cost_[p * n + q] = row[cols_[q]];
    }
  }
  return run(m, n);
}

double emd_solver::solve_dense(std::span<double const> a,
                               std::span<double const> b,
                               std::span<double const> cost) {
  if (cost.size() != a.size() * b.size()) {
    throw emd_error("emd: cost matrix has the wrong shape");
  }
  auto const sa = checked_sum(a, "supply");
  auto const sb = checked_sum(b, "demand");
  if (std::abs(sa - sb) > mass_tolerance * std::max(1.0, sa)) {
    throw emd_error("emd: supply and demand do not balance");
  }
  for (auto const c : cost) {
    if (!std::isfinite(c)) {
      throw emd_error("emd: non-finite cost");
    }
  }
  rows_.clear();
  cols_.clear();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) {
      rows_.push_back(static_cast<std::uint32_t>(i));
    }
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] > 0.0) {
      cols_.push_back(static_cast<std::uint32_t>(j));
    }
  }
  auto const m = rows_.size();
  auto const n = cols_.size();
  supply_.resize(m + n);
  for (std::size_t p = 0; p < m; ++p) {
    supply_[p] = a[rows_[p]];
  }
  for (std::size_t q = 0; q < n; ++q) {
    supply_[m + q] = -b[cols_[q]];
  }
  cost_.resize(m * n);
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      cost_[p * n + q] = cost[rows_[p] * b.size() + cols_[q]];
    }
  }
  return run(m, n);
}

double emd(std::span<double const> a, std::span<double const> b,
           ground_distance_matrix const& ground) {
  emd_solver solver;
  return solver.solve(a, b, ground);
}

// --- condensed matrix -------------------------------------------------------

std::size_t condensed_distance_matrix::index(std::size_t n, std::size_t i,
                                             std::size_t j) {
  if (i > j) {
    std::swap(i, j);
  }
  return n * i - i * (i + 1) / 2 + (j - i - 1);
}

double condensed_distance_matrix::at(std::size_t i, std::size_t j) const {
  if (i == j) {
    return 0.0;
  }
  return values[index(n, i, j)];
}

condensed_distance_matrix pairwise_distances(
    std::span<feature_matrix const> features,
    ground_distance_matrix const& ground, unsigned threads) {
  auto const n = features.size();
  if (n < 2) {
    throw std::invalid_argument("pairwise_distances: need at least 2 features");
  }
  condensed_distance_matrix result;
  result.n = n;
  result.values.assign(n * (n - 1) / 2, 0.0);
  for (auto const& f : features) {
    result.labels.push_back(f.edge);
  }

  if (threads == 0) {
    threads = std::max(1U, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, n - 1));

  // Rows are handed out dynamically; every value lands in its fixed slot so
  // the schedule cannot influence the output.
  std::atomic<std::size_t> next_row{0};
  std::mutex error_mutex;
  std::size_t error_pair = std::numeric_limits<std::size_t>::max();
  std::string error_message;

  auto const worker = [&]() {
    emd_solver solver;
    while (true) {
      auto const i = next_row.fetch_add(1);
      if (i + 1 >= n) {
        return;
      }
      for (auto j = i + 1; j < n; ++j) {
        auto const idx = condensed_distance_matrix::index(n, i, j);
        try {
          result.values[idx] =
              solver.solve(features[i].values, features[j].values, ground);
        } catch (emd_error const& e) {
          std::lock_guard const lock{error_mutex};
          if (idx < error_pair) {
            error_pair = idx;
            error_message = "pair (" + features[i].edge.to_string() + ", " +
                            features[j].edge.to_string() + "): " + e.what();
          }
        }
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  if (!error_message.empty()) {
    throw emd_error(error_message);
  }
  return result;
}

// --- persistence ------------------------------------------------------------

namespace {

constexpr char binary_magic[8] = {'D', 'P', 'D', 'I', 'S', 'T', '0', '1'};
constexpr std::string_view text_magic = "# delayprof condensed distance matrix v1";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
  }
}

void put_str(std::string& out, std::string const& s) {
  put_u64(out, s.size());
  out += s;
}

struct byte_reader {
  std::string const& data;
  std::size_t pos{0};

  std::uint64_t u64() {
    if (pos + 8 > data.size()) {
      throw io_error("distance matrix: truncated binary file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i]))
           << (8 * i);
    }
    pos += 8;
    return v;
  }
  std::string str() {
    auto const len = u64();
    if (pos + len > data.size()) {
      throw io_error("distance matrix: truncated binary file");
    }
    auto s = data.substr(pos, len);
    pos += len;
    return s;
  }
};

}  // namespace

void write_distance_matrix(fs::path const& path,
                           condensed_distance_matrix const& m) {
  std::string out;
  if (path.extension() == ".bin") {
    out.append(binary_magic, sizeof(binary_magic));
    put_u64(out, m.n);
    put_u64(out, m.metadata.size());
    for (auto const& [k, v] : m.metadata) {
      put_str(out, k);
      put_str(out, v);
    }
    for (auto const& e : m.labels) {
      put_str(out, e.stop_from);
      put_str(out, e.stop_to);
    }
    for (auto const v : m.values) {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  } else {
    out += text_magic;
    out += "\nn," + std::to_string(m.n) + "\n";
    for (auto const& [k, v] : m.metadata) {
      out += "meta," + csv_escape(k) + "," + csv_escape(v) + "\n";
    }
    for (auto const& e : m.labels) {
      out += "edge," + csv_escape(e.stop_from) + "," + csv_escape(e.stop_to) +
             "\n";
    }
    out += "values\n";
    for (auto const v : m.values) {
      out += format_double(v);
      out += '\n';
    }
  }
  write_file(path, out);
}

condensed_distance_matrix read_distance_matrix(fs::path const& path) {
  auto const data = read_file(path);
  condensed_distance_matrix m;
  if (data.size() >= sizeof(binary_magic) &&
      std::memcmp(data.data(), binary_magic, sizeof(binary_magic)) == 0) {
    byte_reader r{data, sizeof(binary_magic)};
    m.n = r.u64();
    auto const meta = r.u64();
    for (std::uint64_t i = 0; i < meta; ++i) {
      auto k = r.str();
      m.metadata[k] = r.str();
    }
    for (std::size_t i = 0; i < m.n; ++i) {
      auto from = r.str();
      m.labels.push_back({from, r.str()});
    }
    auto const count = m.n < 2 ? 0 : m.n * (m.n - 1) / 2;
    m.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      m.values.push_back(std::bit_cast<double>(r.u64()));
    }
    return m;
  }

  if (!data.starts_with(text_magic)) {
    throw io_error(path.string() + ": not a distance matrix file");
  }
  bool in_values = false;
  std::size_t pos = data.find('\n') + 1;
  while (pos < data.size()) {
    auto end = data.find('\n', pos);
    if (end == std::string::npos) {
      end = data.size();
    }
    auto const line = std::string_view{data}.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) {
      continue;
    }
    if (in_values) {
      m.values.push_back(parse_double(line));
      continue;
    }
    auto const f = split_csv_line(line);
    if (f[0] == "n" && f.size() == 2) {
      m.n = static_cast<std::size_t>(parse_int(f[1]));
    } else if (f[0] == "meta" && f.size() == 3) {
      m.metadata[f[1]] = f[2];
    } else if (f[0] == "edge" && f.size() == 3) {
      m.labels.push_back({f[1], f[2]});
    } else if (f[0] == "values") {
      in_values = true;
    } else {
      throw io_error(path.string() + ": unexpected line '" + std::string{line} +
                     "'");
    }
  }
  auto const expected = m.n < 2 ? 0 : m.n * (m.n - 1) / 2;
  if (m.labels.size() != m.n || m.values.size() != expected) {
    throw io_error(path.string() + ": inconsistent distance matrix");
  }
  return m;
}

}  // namespace delayprof
