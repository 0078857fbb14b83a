#include "delayprof/features.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "delayprof/io.h"

namespace fs = std::filesystem;

namespace delayprof {

binning_scheme binning_scheme::standard() {
  binning_scheme s;
  // 5-minute bins out to 30.5, 1-minute bins inside 5.5, mirrored.
  s.delay_boundaries = {-30.5, -25.5, -20.5, -15.5, -10.5, -5.5, -4.5, -3.5,
                        -2.5,  -1.5,  -0.5,  0.5,   1.5,   2.5,  3.5,  4.5,
                        5.5,   10.5,  15.5,  20.5,  25.5,  30.5};
  s.first_hour = 6;
  s.hour_bins = 15;
  return s;
}

std::size_t binning_scheme::no_change_bin() const {
  return delay_bin_index(0.0, *this);
}

double binning_scheme::lower(std::size_t i) const {
  return i == 0 ? -std::numeric_limits<double>::infinity()
                : delay_boundaries[i - 1];
}

double binning_scheme::upper(std::size_t i) const {
  return i == delay_boundaries.size() ? std::numeric_limits<double>::infinity()
                                      : delay_boundaries[i];
}

std::string binning_scheme::delay_label(std::size_t i) const {
  auto const bound = [](double v) {
    if (std::isinf(v)) {
      return std::string{v < 0 ? "-inf" : "inf"};
    }
    return format_double(v);
  };
  return "(" + bound(lower(i)) + "," + bound(upper(i)) + "]";
}

void binning_scheme::validate() const {
  if (delay_boundaries.empty()) {
    throw std::invalid_argument("binning: no delay boundaries");
  }
  for (std::size_t i = 0; i < delay_boundaries.size(); ++i) {
    if (!std::isfinite(delay_boundaries[i]) ||
        (i > 0 && delay_boundaries[i] <= delay_boundaries[i - 1])) {
      throw std::invalid_argument(
          "binning: delay boundaries must be finite and strictly increasing");
    }
  }
  if (first_hour < 0 || hour_bins <= 0 || first_hour + hour_bins > 24) {
    throw std::invalid_argument("binning: hour bins must lie within a day");
  }
}

std::size_t delay_bin_index(double delta_minutes, binning_scheme const& scheme) {
  if (!std::isfinite(delta_minutes)) {
    throw std::invalid_argument("delay_bin_index: non-finite delta");
  }
  auto const& b = scheme.delay_boundaries;
  // number of boundaries strictly below delta == index of the (lo, hi] bin
  return static_cast<std::size_t>(
      std::lower_bound(begin(b), end(b), delta_minutes) - begin(b));
}

std::size_t delay_bin_index_ms(std::int64_t delta_ms,
                               binning_scheme const& scheme) {
  return delay_bin_index(static_cast<double>(delta_ms) / 60000.0, scheme);
}

std::size_t time_bin_index(civil_time const& t, binning_scheme const& scheme) {
  auto const idx = t.hour() - scheme.first_hour;
  if (idx < 0 || idx >= scheme.hour_bins) {
    throw std::out_of_range("timestamp " + t.to_string() +
                            " outside the binned service hours");
  }
  return static_cast<std::size_t>(idx);
}

std::uint64_t count_grid::total() const {
  std::uint64_t s = 0;
  for (auto const c : counts) {
    s += c;
  }
  return s;
}

std::uint64_t count_grid::column_total(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    s += at(r, c);
  }
  return s;
}

count_grid build_histogram(edge_observations const& obs,
                           binning_scheme const& scheme) {
  count_grid grid{scheme.delay_bins(), scheme.time_bins()};
  for (auto const& e : obs.events) {
    ++grid.at(delay_bin_index_ms(e.delay_delta_ms, scheme),
              time_bin_index(e.observed_at, scheme));
  }
  return grid;
}

normalized normalize(count_grid const& counts) {
  normalized out;
  for (std::size_t c = 0; c < counts.cols; ++c) {
    if (counts.column_total(c) == 0) {
      out.reject_reason = "empty time bin " + std::to_string(c);
      return out;
    }
  }

  // Stage 1: each hourly column becomes a distribution. Integer counts keep
  // the quotients exact-rounded, so scaling a column leaves them unchanged.
  out.values.resize(counts.counts.size());
  for (std::size_t c = 0; c < counts.cols; ++c) {
    auto const col_sum = static_cast<double>(counts.column_total(c));
    for (std::size_t r = 0; r < counts.rows; ++r) {
      out.values[r * counts.cols + c] =
          static_cast<double>(counts.at(r, c)) / col_sum;
    }
  }

  // Stage 2: unit total mass.
  double total = 0.0;
  for (auto const v : out.values) {
    total += v;
  }
  for (auto& v : out.values) {
    v /= total;
  }
  return out;
}

double feature_matrix::row_mass(std::size_t r) const {
  double s = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    s += at(r, c);
  }
  return s;
}

featurize_result featurize(std::span<edge_observations const> groups,
                           binning_scheme const& scheme) {
  scheme.validate();
  featurize_result result;
  for (auto const& g : groups) {
    auto const grid = build_histogram(g, scheme);
    auto n = normalize(grid);
    if (!n.accepted()) {
      result.rejected.push_back({g.edge, g.support(), std::move(n.reject_reason)});
      continue;
    }
    result.accepted.push_back(feature_matrix{.edge = g.edge,
                                             .support = g.support(),
                                             .rows = grid.rows,
                                             .cols = grid.cols,
                                             .values = std::move(n.values)});
  }
  return result;
}

void write_features(fs::path const& path,
                    std::span<feature_matrix const> features) {
  std::string out = "stop_from,stop_to,support";
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!features.empty()) {
    rows = features.front().rows;
    cols = features.front().cols;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out += ",d" + std::to_string(r) + "_t" + std::to_string(c);
    }
  }
  out += '\n';
  for (auto const& f : features) {
    if (f.rows != rows || f.cols != cols) {
      throw std::invalid_argument("write_features: mixed matrix shapes");
    }
    out += csv_escape(f.edge.stop_from);
    out += ',';
    out += csv_escape(f.edge.stop_to);
    out += ',';
    out += std::to_string(f.support);
    for (auto const v : f.values) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<feature_matrix> read_features(fs::path const& path) {
  auto const content = read_file(path);
  auto const t = csv_table::parse(content, path.string());
  auto const c_from = t.require_column("stop_from");
  auto const c_to = t.require_column("stop_to");
  auto const c_support = t.require_column("support");

  // shape is encoded by the last column name "d<R-1>_t<C-1>"
  auto const header_end = content.find('\n');
  auto const header = split_csv_line(content.substr(0, header_end));
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (header.size() > 3) {
    auto const last = std::string{trim(header.back())};
    auto const tpos = last.find("_t");
    if (last.empty() || last[0] != 'd' || tpos == std::string::npos) {
      throw io_error(path.string() + ": unrecognized feature header");
    }
    rows = static_cast<std::size_t>(parse_int(last.substr(1, tpos - 1))) + 1;
    cols = static_cast<std::size_t>(parse_int(last.substr(tpos + 2))) + 1;
    if (rows * cols != header.size() - 3) {
      throw io_error(path.string() + ": feature header shape mismatch");
    }
  }

  std::vector<feature_matrix> out;
  out.reserve(t.rows().size());
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto const& row = t.rows()[r];
    feature_matrix f;
    f.edge = {row[c_from], row[c_to]};
    f.rows = rows;
    f.cols = cols;
    try {
      f.support = static_cast<std::size_t>(parse_int(row[c_support]));
      f.values.reserve(rows * cols);
      for (std::size_t i = 3; i < 3 + rows * cols; ++i) {
        f.values.push_back(parse_double(row[i]));
      }
    } catch (std::invalid_argument const& e) {
      throw io_error(path.string() + " line " + std::to_string(t.line_of(r)) +
                     ": " + e.what());
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_rejects(fs::path const& path, std::span<rejected_edge const> rejects) {
  std::string out = "stop_from,stop_to,support,reason\n";
  for (auto const& r : rejects) {
    out += csv_escape(r.edge.stop_from) + "," + csv_escape(r.edge.stop_to) + "," +
           std::to_string(r.support) + "," + csv_escape(r.reason) + "\n";
  }
  write_file(path, out);
}

}  // namespace delayprof
