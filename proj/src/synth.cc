#include "delayprof/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"

#include "delayprof/io.h"

namespace fs = std::filesystem;

namespace delayprof {

std::vector<double> const& planted_profile::weights_at(int hour) const {
  auto const it = hourly.find(hour);
  return it == end(hourly) ? weights : it->second;
}

namespace {

void check_weights(std::vector<double> const& w, binning_scheme const& scheme,
                   std::string const& where) {
  if (w.size() != scheme.delay_bins()) {
    throw synth_error(where + ": expected " +
                      std::to_string(scheme.delay_bins()) + " weights, got " +
                      std::to_string(w.size()));
  }
  double sum = 0.0;
  for (auto const x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw synth_error(where + ": weights must be non-negative");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw synth_error(where + ": weights sum to " + format_double(sum) +
                      ", not 1");
  }
}

}  // namespace

void planted_profile::validate(binning_scheme const& scheme) const {
  check_weights(weights, scheme, "profile " + id);
  for (auto const& [h, w] : hourly) {
    check_weights(w, scheme, "profile " + id + " hour " + std::to_string(h));
  }
  if (!(headway_minutes > 0.0)) {
    throw synth_error("profile " + id + ": headway must be positive");
  }
  if (!(duplicate_rate >= 0.0 && duplicate_rate < 1.0) ||
      !(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw synth_error("profile " + id + ": noise rates must lie in [0, 1)");
  }
}

namespace {

struct band {
  double delta_minutes;  // any value inside the bin
  double weight;
};

planted_profile from_bands(std::string id, std::initializer_list<band> bands,
                           binning_scheme const& scheme) {
  planted_profile p;
  p.id = std::move(id);
  p.weights.assign(scheme.delay_bins(), 0.0);
  for (auto const& b : bands) {
    p.weights[delay_bin_index(b.delta_minutes, scheme)] += b.weight;
  }
  return p;
}

}  // namespace

planted_profile archetype(std::string_view name, binning_scheme const& scheme) {
  if (name == "on_time") {
    return from_bands("on_time",
                      {{0.0, 0.67}, {-1.0, 0.12}, {1.0, 0.16}, {2.0, 0.03},
                       {-2.0, 0.02}},
                      scheme);
  }
  if (name == "increase") {
    return from_bands("increase",
                      {{0.0, 0.37}, {1.0, 0.30}, {2.0, 0.14}, {3.0, 0.07},
                       {-1.0, 0.08}, {4.0, 0.02}, {5.0, 0.02}},
                      scheme);
  }
  if (name == "strong_decrease") {
    return from_bands("strong_decrease",
                      {{0.0, 0.15}, {-1.0, 0.18}, {-2.0, 0.23}, {-3.0, 0.19},
                       {-4.0, 0.10}, {-5.0, 0.05}, {-8.0, 0.02}, {1.0, 0.06},
                       {2.0, 0.02}},
                      scheme);
  }
  if (name == "small_decrease") {
    return from_bands("small_decrease",
                      {{0.0, 0.30}, {-1.0, 0.40}, {-2.0, 0.11}, {-3.0, 0.05},
                       {1.0, 0.10}, {2.0, 0.04}},
                      scheme);
  }
  throw synth_error("unknown archetype '" + std::string(name) + "'");
}

std::vector<planted_profile> archetype_profiles(binning_scheme const& scheme) {
  return {archetype("on_time", scheme), archetype("increase", scheme),
          archetype("strong_decrease", scheme),
          archetype("small_decrease", scheme)};
}

std::size_t synth_network::edge_index(edge_key const& e) const {
  auto const it = std::find(begin(edges), end(edges), e);
  if (it == end(edges)) {
    throw synth_error("edge " + e.to_string() + " is not in the network");
  }
  return static_cast<std::size_t>(it - begin(edges));
}

synth_network build_network(std::size_t edge_count,
                            std::size_t edges_per_line) {
  if (edges_per_line == 0) {
    throw synth_error("edges_per_line must be positive");
  }
  synth_network net;
  std::size_t next_stop = 1000;
  std::size_t tram_no = 1;
  std::size_t bus_no = 100;
  auto remaining = edge_count;
  for (std::size_t li = 0; remaining > 0; ++li) {
    auto const len = std::min(edges_per_line, remaining);
    remaining -= len;

    synth_line line;
    line.type = li % 2 == 0 ? vehicle_type::tram : vehicle_type::bus;
    line.line_no = std::to_string(line.type == vehicle_type::tram ? tram_no++
                                                                  : bus_no++);
    // lines fan out from the centre at the golden angle
    auto const angle = static_cast<double>(li) * std::numbers::pi *
                       (3.0 - std::sqrt(5.0));
    auto const ring = 0.002 * static_cast<double>(li % 7);
    for (std::size_t k = 0; k <= len; ++k) {
      auto const r = ring + 0.004 * static_cast<double>(k);
      stop s;
      s.stop_id = std::to_string(next_stop++);
      s.latitude = 51.11 + r * std::sin(angle);
      s.longitude = 17.03 + 1.6 * r * std::cos(angle);
      s.name = "Line " + line.line_no + " stop " + std::to_string(k + 1);
      line.stops.push_back(s.stop_id);
      net.stops.push_back(std::move(s));
    }
    for (std::size_t k = 0; k < len; ++k) {
      net.edges.push_back({line.stops[k], line.stops[k + 1]});
    }
    net.lines.push_back(std::move(line));
  }
  return net;
}

std::vector<std::size_t> interleaved_assignment(std::size_t edges,
                                                std::size_t profiles) {
  if (profiles == 0) {
    throw synth_error("need at least one profile");
  }
  std::vector<std::size_t> out(edges);
  for (std::size_t i = 0; i < edges; ++i) {
    out[i] = i % profiles;
  }
  return out;
}

namespace {

// Portable draws; std distributions differ between standard libraries.
struct draw {
  std::mt19937_64 engine;

  double unit() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi]
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    auto const span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine() % span);
  }

  std::size_t pick(std::vector<double> const& weights) {
    auto u = unit();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) {
        return i;
      }
      u -= weights[i];
    }
    // rounding slack lands on the last non-empty bin
    for (auto i = weights.size(); i-- > 0;) {
      if (weights[i] > 0.0) {
        return i;
      }
    }
    return 0;
  }
};

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64{seq};
}

constexpr double open_bin_width_minutes = 5.0;

std::int64_t sample_delta_ms(draw& d, std::size_t bin,
                             binning_scheme const& scheme) {
  auto lo = scheme.lower(bin);
  auto hi = scheme.upper(bin);
  if (std::isinf(lo)) {
    lo = hi - open_bin_width_minutes;
  }
  if (std::isinf(hi)) {
    hi = lo + open_bin_width_minutes;
  }
  auto const lo_ms = static_cast<std::int64_t>(std::llround(lo * 60000.0));
  auto const hi_ms = static_cast<std::int64_t>(std::llround(hi * 60000.0));
  return d.between(lo_ms + 1, hi_ms);
}

std::vector<civil_time> service_days(synth_options const& o) {
  std::vector<civil_time> days;
  auto day = civil_time{std::chrono::floor<std::chrono::days>(o.start.point())};
  while (days.size() < o.days) {
    if (o.weekends || day.is_weekday()) {
      days.push_back(day);
    }
    day = day + std::chrono::days{1};
  }
  return days;
}

std::vector<int> departures(double headway_minutes, synth_options const& o) {
  std::vector<int> out;
  auto const step = static_cast<int>(std::lround(headway_minutes * 60.0));
  if (step <= 0) {
    throw synth_error("headway below one second");
  }
  for (int t = o.first_departure_hour * 3600; t < o.last_departure_hour * 3600;
       t += step) {
    out.push_back(t);
  }
  return out;
}

planted_profile const& line_profile(synth_network const& net, std::size_t line,
                                    std::span<std::size_t const> edge_profile,
                                    std::span<planted_profile const> profiles) {
  std::size_t first_edge = 0;
  for (std::size_t l = 0; l < line; ++l) {
    first_edge += net.lines[l].stops.size() - 1;
  }
  return profiles[edge_profile[first_edge]];
}

}  // namespace

synth_corpus generate_corpus(synth_network const& network,
                             std::span<std::size_t const> edge_profile,
                             std::span<planted_profile const> profiles,
                             binning_scheme const& scheme,
                             synth_options const& options) {
  if (edge_profile.size() != network.edges.size()) {
    throw synth_error("every edge needs a profile");
  }
  for (auto const p : edge_profile) {
    if (p >= profiles.size()) {
      throw synth_error("profile index out of range");
    }
  }
  for (auto const& p : profiles) {
    p.validate(scheme);
  }
  if (options.travel_minutes <= 0) {
    throw synth_error("travel time must be positive");
  }

  std::map<std::string, stop const*> stop_of;
  for (auto const& s : network.stops) {
    stop_of[s.stop_id] = &s;
  }

  draw delays{stream(options.seed, 1)};
  draw noise{stream(options.seed, 2)};

  synth_corpus corpus;
  corpus.edge_profile.assign(begin(edge_profile), end(edge_profile));
  std::int64_t next_course = 1;
  auto const travel = std::chrono::seconds{options.travel_minutes * 60};

  auto const emit = [&](vehicle_snapshot s, planted_profile const& p) {
    if (noise.unit() < p.dropout_rate) {
      return;
    }
    auto const dup = noise.unit() < p.duplicate_rate;
    corpus.records.push_back(s);
    if (dup) {
      s.time = s.time + std::chrono::seconds{10};
      corpus.records.push_back(std::move(s));
    }
  };

  for (auto const& day : service_days(options)) {
    std::size_t edge_base = 0;
    for (std::size_t li = 0; li < network.lines.size(); ++li) {
      auto const& line = network.lines[li];
      auto const& lp = line_profile(network, li, edge_profile, profiles);
      auto const deps = departures(lp.headway_minutes, options);
      for (std::size_t j = 0; j < deps.size(); ++j) {
        auto const course = next_course++;
        auto const offset = std::chrono::seconds{delays.between(0, 59)};
        auto delay = delays.between(-60000, 180000);
        auto t = day + std::chrono::seconds{deps[j]} + offset;

        vehicle_snapshot s;
        s.course_id = course;
        s.vehicle_id = static_cast<std::int64_t>(1000 + li * 100 + j % 100);
        s.line_no = line.line_no;
        s.type = line.type;
        s.direction = stop_of.at(line.stops.back())->name;

        for (std::size_t k = 0; k < line.stops.size(); ++k) {
          auto const& here = *stop_of.at(line.stops[k]);
          auto const& edge_p =
              profiles[edge_profile[edge_base + std::min(k, line.stops.size() - 2)]];
          if (k > 0) {
            auto const& p = profiles[edge_profile[edge_base + k - 1]];
            auto const bin = delays.pick(p.weights_at(t.hour()));
            delay += sample_delta_ms(delays, bin, scheme);
          }
          s.latitude = here.latitude;
          s.longitude = here.longitude;
          s.stop_no = here.stop_id;
          s.delay_ms = delay;
          s.time = t;
          emit(s, edge_p);

          if (k + 1 < line.stops.size()) {
            auto const& next = *stop_of.at(line.stops[k + 1]);
            s.latitude = (here.latitude + next.latitude) / 2.0;
            s.longitude = (here.longitude + next.longitude) / 2.0;
            s.time = t + travel / 2;
            emit(s, edge_p);
            t = t + travel;
          }
        }
      }
      edge_base += line.stops.size() - 1;
    }
  }

  std::stable_sort(begin(corpus.records), end(corpus.records),
                   [](auto const& a, auto const& b) { return a.time < b.time; });
  return corpus;
}

namespace {

std::vector<double> parse_bands(nlohmann::json const& j,
                                binning_scheme const& scheme,
                                std::string const& where) {
  if (!j.is_object()) {
    throw synth_error(where + ": bands must be an object");
  }
  std::vector<double> w(scheme.delay_bins(), 0.0);
  for (auto const& [key, value] : j.items()) {
    std::optional<std::size_t> bin;
    for (std::size_t i = 0; i < scheme.delay_bins(); ++i) {
      if (scheme.delay_label(i) == key) {
        bin = i;
      }
    }
    if (!bin) {
      try {
        bin = delay_bin_index(parse_double(key), scheme);
      } catch (std::exception const&) {
        throw synth_error(where + ": unknown band '" + key + "'");
      }
    }
    if (!value.is_number()) {
      throw synth_error(where + ": band weights must be numbers");
    }
    w[*bin] += value.get<double>();
  }
  return w;
}

}  // namespace

synth_spec parse_synth_spec(std::string_view json_text,
                            binning_scheme const& scheme) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (std::exception const& e) {
    throw synth_error(std::string("profiles file: ") + e.what());
  }
  if (!j.is_object() || !j.contains("profiles") || !j["profiles"].is_array() ||
      j["profiles"].empty()) {
    throw synth_error("profiles file: needs a non-empty \"profiles\" array");
  }

  synth_spec spec;
  try {
    for (auto const& pj : j["profiles"]) {
      planted_profile p;
      if (pj.contains("archetype")) {
        p = archetype(pj["archetype"].get<std::string>(), scheme);
      }
      p.id = pj.value("id", p.id);
      if (p.id.empty()) {
        p.id = "profile" + std::to_string(spec.profiles.size() + 1);
      }
      if (pj.contains("bands")) {
        p.weights = parse_bands(pj["bands"], scheme, "profile " + p.id);
      }
      if (pj.contains("hourly")) {
        for (auto const& [hour, bands] : pj["hourly"].items()) {
          p.hourly[static_cast<int>(parse_int(hour))] =
              parse_bands(bands, scheme, "profile " + p.id + " hour " + hour);
        }
      }
      p.headway_minutes = pj.value("headway_minutes", p.headway_minutes);
      p.duplicate_rate = pj.value("duplicate_rate", p.duplicate_rate);
      p.dropout_rate = pj.value("dropout_rate", p.dropout_rate);
      p.validate(scheme);
      spec.profiles.push_back(std::move(p));
    }
    spec.edges_per_line = j.value("edges_per_line", spec.edges_per_line);
    spec.options.weekends = j.value("weekends", spec.options.weekends);
    spec.options.travel_minutes =
        j.value("travel_minutes", spec.options.travel_minutes);
    if (j.contains("start_date")) {
      spec.options.start =
          civil_time::parse(j["start_date"].get<std::string>() + " 00:00:00");
    }
  } catch (synth_error const&) {
    throw;
  } catch (std::exception const& e) {
    throw synth_error(std::string("profiles file: ") + e.what());
  }
  return spec;
}

void write_gtfs_feed(fs::path const& dir, synth_network const& network,
                     synth_options const& options,
                     std::span<planted_profile const> profiles,
                     std::span<std::size_t const> edge_profile) {
  fs::create_directories(dir);
  std::string stops = "stop_id,stop_name,stop_lat,stop_lon\n";
  for (auto const& s : network.stops) {
    stops += csv_escape(s.stop_id) + "," + csv_escape(s.name) + "," +
             format_fixed(s.latitude, 6) + "," + format_fixed(s.longitude, 6) +
             "\n";
  }
  write_file(dir / "stops.txt", stops);

  std::string routes = "route_id,route_short_name,route_type\n";
  std::string trips = "route_id,service_id,trip_id\n";
  std::string times =
      "trip_id,arrival_time,departure_time,stop_id,stop_sequence,pickup_type,"
      "drop_off_type\n";
  for (std::size_t li = 0; li < network.lines.size(); ++li) {
    auto const& line = network.lines[li];
    routes += line.line_no + "," + line.line_no + "," +
              (line.type == vehicle_type::tram ? "0" : "3") + "\n";
    auto const& p = line_profile(network, li, edge_profile, profiles);
    auto const deps = departures(p.headway_minutes, options);
    for (std::size_t j = 0; j < deps.size(); ++j) {
      auto const trip = line.line_no + "_" + std::to_string(j + 1);
      trips += line.line_no + ",weekday," + trip + "\n";
      for (std::size_t k = 0; k < line.stops.size(); ++k) {
        auto const t = deps[j] + static_cast<int>(k) * options.travel_minutes * 60;
        auto const two = [](int v) {
          return (v < 10 ? "0" : "") + std::to_string(v);
        };
        auto const hms =
            two(t / 3600) + ":" + two(t / 60 % 60) + ":" + two(t % 60);
        times += trip + "," + hms + "," + hms + "," + line.stops[k] + "," +
                 std::to_string(k + 1) + ",0,0\n";
      }
    }
  }
  write_file(dir / "routes.txt", routes);
  write_file(dir / "trips.txt", trips);
  write_file(dir / "stop_times.txt", times);
}

void write_synth_output(fs::path const& dir, synth_network const& network,
                        synth_corpus const& corpus,
                        std::span<planted_profile const> profiles,
                        synth_options const& options) {
  fs::create_directories(dir / "avl");

  std::map<std::string, std::vector<vehicle_snapshot>> by_day;
  for (auto const& r : corpus.records) {
    by_day[r.time.to_string().substr(0, 10)].push_back(r);
  }
  for (auto const& [day, records] : by_day) {
    std::string out;
    for (auto const& r : records) {
      out += serialize_snapshot(r);
      out += '\n';
    }
    write_file(dir / "avl" / (day + ".jsonl"), out);
  }

  write_gtfs_feed(dir / "gtfs", network, options, profiles,
                  corpus.edge_profile);

  std::string labels = "stop_from,stop_to,profile,label\n";
  for (std::size_t i = 0; i < network.edges.size(); ++i) {
    auto const p = corpus.edge_profile[i];
    labels += csv_escape(network.edges[i].stop_from) + "," +
              csv_escape(network.edges[i].stop_to) + "," +
              csv_escape(profiles[p].id) + "," + std::to_string(p + 1) + "\n";
  }
  write_file(dir / "labels.csv", labels);

  write_file(dir / "pipeline.cfg",
             "avl_input = avl\n"
             "gtfs_feed = gtfs\n"
             "window = 6:21\n"
             "weekdays_only = " +
                 std::string(options.weekends ? "false" : "true") +
                 "\n"
                 "min_support = 200\n"
                 "cuts = 2,3,4\n");
}

}  // namespace delayprof
