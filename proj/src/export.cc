#include "delayprof/export.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "delayprof/io.h"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace delayprof {

ordered_json export_geojson(std::span<edge_assignment const> assignments,
                            stop_map const& stops,
                            std::span<edge_summary const> summaries,
                            geojson_filter const& filter) {
  std::set<std::string> missing;
  for (auto const& a : assignments) {
    for (auto const* id : {&a.edge.stop_from, &a.edge.stop_to}) {
      if (!stops.contains(*id)) {
        missing.insert(*id);
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "export_geojson: unknown stop ids:";
    for (auto const& id : missing) {
      msg += " " + id;
    }
    throw export_error(msg);
  }

  std::map<edge_key, edge_summary const*> by_edge;
  for (auto const& s : summaries) {
    by_edge[s.edge] = &s;
  }

  std::vector<edge_assignment const*> sorted;
  for (auto const& a : assignments) {
    sorted.push_back(&a);
  }
  std::sort(begin(sorted), end(sorted),
            [](auto const* x, auto const* y) { return x->edge < y->edge; });

  auto features = ordered_json::array();
  for (auto const* a : sorted) {
    auto const it = by_edge.find(a->edge);
    auto const mode = it == end(by_edge) ? '?' : it->second->mode();
    auto const support = it == end(by_edge)
                             ? std::size_t{0}
                             : it->second->bus_events + it->second->tram_events;
    if (filter.cluster && *filter.cluster != a->cluster) {
      continue;
    }
    if (filter.mode && *filter.mode != mode) {
      continue;
    }
    auto const& from = stops.at(a->edge.stop_from);
    auto const& to = stops.at(a->edge.stop_to);

    ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {
        {"type", "LineString"},
        {"coordinates",
         {{from.longitude, from.latitude}, {to.longitude, to.latitude}}}};
    f["properties"] = {{"cluster", a->cluster},
                       {"mode", std::string(1, mode)},
                       {"support", support},
                       {"stop_from", a->edge.stop_from},
                       {"stop_to", a->edge.stop_to}};
    features.push_back(std::move(f));
  }
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = std::move(features);
  return fc;
}

std::string format_probability(double p) {
  return format_double(std::round(p * 1e6) / 1e6);
}

std::string profile_summary_csv(std::span<cluster_profile const> profiles,
                                binning_scheme const& scheme,
                                std::span<std::string const> lineage) {
  std::string out =
      "cluster,lineage,size,p_no_change,p_increase,p_decrease,"
      "pooled_no_change,pooled_increase,pooled_decrease,bus_edges,tram_edges,"
      "mixed_edges,bus_events,tram_events,dominant_bands\n";
  auto const opt = [](std::optional<double> const& v) {
    return v ? format_probability(*v) : std::string{};
  };
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    auto const& p = profiles[i];
    out += std::to_string(p.label) + ",";
    out += csv_escape(i < lineage.size() ? lineage[i] : std::string{}) + ",";
    out += std::to_string(p.members.size()) + ",";
    out += format_probability(p.p_no_change) + ",";
    out += format_probability(p.p_increase) + ",";
    out += format_probability(p.p_decrease) + ",";
    out += opt(p.pooled_no_change) + "," + opt(p.pooled_increase) + "," +
           opt(p.pooled_decrease) + ",";
    if (p.modes) {
      out += std::to_string(p.modes->bus_edges) + "," +
             std::to_string(p.modes->tram_edges) + "," +
             std::to_string(p.modes->mixed_edges) + "," +
             std::to_string(p.modes->bus_events) + "," +
             std::to_string(p.modes->tram_events) + ",";
    } else {
      out += ",,,,,";
    }
    std::string bands;
    for (auto const b : p.dominant_bands(3)) {
      if (!bands.empty()) {
        bands += ' ';
      }
      bands += scheme.delay_label(b) + "=" +
               format_probability(p.band_likelihood[b]);
    }
    out += csv_escape(bands) + "\n";
  }
  return out;
}

std::string profile_matrix_text(cluster_profile const& profile,
                                binning_scheme const& scheme) {
  std::string out = "delay_bin";
  for (std::size_t c = 0; c < profile.cols; ++c) {
    auto const h = scheme.first_hour + static_cast<int>(c);
    out += ",h";
    if (h < 10) {
      out += '0';
    }
    out += std::to_string(h);
  }
  out += '\n';
  // highest delay gain first
  for (std::size_t r = profile.rows; r-- > 0;) {
    out += csv_escape(scheme.delay_label(r));
    for (std::size_t c = 0; c < profile.cols; ++c) {
      out += ',';
      out += format_double(profile.mean_matrix[r * profile.cols + c]);
    }
    out += '\n';
  }
  return out;
}

written_profiles export_profiles(std::span<cluster_profile const> profiles,
                                 binning_scheme const& scheme,
                                 fs::path const& dir, std::string const& stem,
                                 std::span<std::string const> lineage) {
  written_profiles w;
  w.summary = dir / (stem + ".csv");
  write_file(w.summary, profile_summary_csv(profiles, scheme, lineage));
  for (auto const& p : profiles) {
    auto path = dir / (stem + "_c" + std::to_string(p.label) + ".txt");
    write_file(path, profile_matrix_text(p, scheme));
    w.matrices.push_back(std::move(path));
  }
  return w;
}

std::string assignments_csv(std::span<edge_key const> edges,
                            std::span<std::size_t const> cuts,
                            std::span<std::vector<std::size_t> const> labels) {
  std::string out = "stop_from,stop_to";
  for (auto const k : cuts) {
    out += ",k" + std::to_string(k);
  }
  out += '\n';
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out += csv_escape(edges[i].stop_from) + "," + csv_escape(edges[i].stop_to);
    for (auto const& l : labels) {
      out += "," + std::to_string(l.at(i));
    }
    out += '\n';
  }
  return out;
}

std::vector<edge_assignment> read_assignments(fs::path const& path,
                                              std::size_t k) {
  auto const t = csv_table::parse(read_file(path), path.string());
  auto const c_from = t.require_column("stop_from");
  auto const c_to = t.require_column("stop_to");
  auto const c_k = t.require_column("k" + std::to_string(k));
  std::vector<edge_assignment> out;
  for (auto const& row : t.rows()) {
    out.push_back({{row[c_from], row[c_to]},
                   static_cast<std::size_t>(parse_int(row[c_k]))});
  }
  return out;
}

}  // namespace delayprof
