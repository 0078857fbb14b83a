#include "delayprof/edges.h"

#include <algorithm>
#include <stdexcept>

#include "delayprof/io.h"

namespace fs = std::filesystem;

namespace delayprof {

std::vector<delay_change_event> extract_delay_changes(
    std::span<vehicle_snapshot const> course) {
  std::vector<delay_change_event> events;
  for (std::size_t i = 1; i < course.size(); ++i) {
    auto const& prev = course[i - 1];
    auto const& cur = course[i];
    if (prev.stop_no == cur.stop_no) {
      continue;
    }
    events.push_back(delay_change_event{
        .edge = {prev.stop_no, cur.stop_no},
        .delay_delta_ms = cur.delay_ms - prev.delay_ms,
        .observed_at = cur.time,
        .course_id = cur.course_id,
        .type = cur.type,
        .line_no = cur.line_no});
  }
  return events;
}

std::vector<delay_change_event> extract_all_delay_changes(
    std::span<vehicle_snapshot const> records) {
  auto const sorted = std::is_sorted(begin(records), end(records),
                                     [](auto const& a, auto const& b) {
                                       return a.course_id != b.course_id
                                                  ? a.course_id < b.course_id
                                                  : a.time < b.time;
                                     });
  std::vector<vehicle_snapshot> copy;
  if (!sorted) {
    copy.assign(begin(records), end(records));
    std::sort(begin(copy), end(copy), canonical_less);
    records = copy;
  }

  std::vector<delay_change_event> events;
  std::size_t start = 0;
  while (start < records.size()) {
    auto end_idx = start + 1;
    while (end_idx < records.size() &&
           records[end_idx].course_id == records[start].course_id) {
      ++end_idx;
    }
    auto course_events =
        extract_delay_changes(records.subspan(start, end_idx - start));
    events.insert(end(events), std::make_move_iterator(begin(course_events)),
                  std::make_move_iterator(end(course_events)));
    start = end_idx;
  }
  return events;
}

std::vector<edge_observations> group_by_edge(
    std::vector<delay_change_event> events) {
  std::sort(begin(events), end(events), [](auto const& a, auto const& b) {
    return std::tie(a.edge, a.observed_at, a.course_id, a.delay_delta_ms,
                    a.type, a.line_no) < std::tie(b.edge, b.observed_at,
                                                  b.course_id, b.delay_delta_ms,
                                                  b.type, b.line_no);
  });
  std::vector<edge_observations> groups;
  for (auto& e : events) {
    if (groups.empty() || groups.back().edge != e.edge) {
      groups.push_back(edge_observations{.edge = e.edge, .events = {}});
    }
    groups.back().events.push_back(std::move(e));
  }
  return groups;
}

std::vector<edge_observations> filter_by_schedule(
    std::vector<edge_observations> groups, schedule_edge_set const& schedule) {
  std::erase_if(groups, [&](auto const& g) {
    return !schedule.is_mandatory(g.edge.stop_from, g.edge.stop_to);
  });
  return groups;
}

std::vector<edge_observations> filter_by_support(
    std::vector<edge_observations> groups, std::size_t min_support) {
  std::erase_if(groups,
                [&](auto const& g) { return g.support() <= min_support; });
  return groups;
}

std::vector<sweep_row> support_sweep(std::span<edge_observations const> groups,
                                     std::span<std::size_t const> thresholds) {
  if (thresholds.empty()) {
    throw std::invalid_argument("support_sweep: no thresholds given");
  }
  std::vector<std::size_t> supports;
  supports.reserve(groups.size());
  for (auto const& g : groups) {
    supports.push_back(g.support());
  }
  std::sort(begin(supports), end(supports));
  std::vector<sweep_row> rows;
  for (auto const d : thresholds) {
    auto const first_above =
        std::upper_bound(begin(supports), end(supports), d);
    rows.push_back({d, static_cast<std::size_t>(end(supports) - first_above)});
  }
  return rows;
}

std::vector<delay_change_event> flatten(
    std::span<edge_observations const> groups) {
  std::vector<delay_change_event> out;
  for (auto const& g : groups) {
    out.insert(end(out), begin(g.events), end(g.events));
  }
  return out;
}

void write_events(fs::path const& path,
                  std::span<delay_change_event const> events) {
  std::string out =
      "stop_from,stop_to,delay_delta_ms,observed_at,course_id,vehicle_type,"
      "line_no\n";
  for (auto const& e : events) {
    out += csv_escape(e.edge.stop_from);
    out += ',';
    out += csv_escape(e.edge.stop_to);
    out += ',';
    out += std::to_string(e.delay_delta_ms);
    out += ',';
    out += e.observed_at.to_string();
    out += ',';
    out += std::to_string(e.course_id);
    out += ',';
    out += to_char(e.type);
    out += ',';
    out += csv_escape(e.line_no);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<delay_change_event> read_events(fs::path const& path) {
  auto const t = csv_table::parse(read_file(path), path.string());
  auto const c_from = t.require_column("stop_from");
  auto const c_to = t.require_column("stop_to");
  auto const c_delta = t.require_column("delay_delta_ms");
  auto const c_at = t.require_column("observed_at");
  auto const c_course = t.require_column("course_id");
  auto const c_type = t.require_column("vehicle_type");
  auto const c_line = t.require_column("line_no");

  std::vector<delay_change_event> events;
  events.reserve(t.rows().size());
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    auto const& row = t.rows()[r];
    try {
      auto const vt = vehicle_type_from(row[c_type]);
      if (!vt) {
        throw std::invalid_argument("unknown vehicle type " + row[c_type]);
      }
      events.push_back(delay_change_event{
          .edge = {row[c_from], row[c_to]},
          .delay_delta_ms = parse_int(row[c_delta]),
          .observed_at = civil_time::parse(row[c_at]),
          .course_id = parse_int(row[c_course]),
          .type = *vt,
          .line_no = row[c_line]});
    } catch (std::invalid_argument const& e) {
      throw io_error(path.string() + " line " + std::to_string(t.line_of(r)) +
                     ": " + e.what());
    }
  }
  return events;
}

}  // namespace delayprof
