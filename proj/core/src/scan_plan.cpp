#include "meltpool/scan_plan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace meltpool {
namespace {

// 53-bit uniform in [0, 1); avoids the implementation-defined distributions.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ProfileTerms {
  std::array<double, 4> freq{};
  std::array<double, 4> phase{};
};

ProfileTerms profile_terms(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProfileTerms t;
  for (std::size_t i = 0; i < 4; ++i) {
    t.freq[i] = 100.0 + 900.0 * unit_draw(rng);
    t.phase[i] = 2.0 * std::numbers::pi * unit_draw(rng);
  }
  return t;
}

}  // namespace

std::string to_string(WaveformKind kind) {
  switch (kind) {
    case WaveformKind::constant: return "constant";
    case WaveformKind::sinusoid: return "sinusoid";
    case WaveformKind::profile: return "profile";
  }
  return "constant";
}

WaveformKind waveform_kind_from_string(const std::string& name) {
  if (name == "constant") return WaveformKind::constant;
  if (name == "sinusoid") return WaveformKind::sinusoid;
  if (name == "profile") return WaveformKind::profile;
  throw std::invalid_argument("unknown waveform kind: " + name);
}

double Waveform::eval(double t_s) const {
  double v = base;
  switch (kind) {
    case WaveformKind::constant:
      break;
    case WaveformKind::sinusoid:
      v = base + amplitude * std::sin(2.0 * std::numbers::pi * frequency_hz * t_s);
      break;
    case WaveformKind::profile: {
      const ProfileTerms terms = profile_terms(seed);
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += std::sin(2.0 * std::numbers::pi * terms.freq[i] * t_s + terms.phase[i]);
      v = base + 0.5 * amplitude * s;
      break;
    }
  }
  return std::clamp(v, lower, upper);
}

void Waveform::validate() const {
  if (!(lower <= upper)) throw std::invalid_argument("waveform clamp bounds inverted");
  if (!std::isfinite(base) || !std::isfinite(amplitude) || !std::isfinite(frequency_hz))
    throw std::invalid_argument("waveform parameters must be finite");
  if (kind == WaveformKind::sinusoid && frequency_hz < 0.0) throw std::invalid_argument("negative frequency");
}

Waveform Waveform::constant(double value, double lower, double upper) {
  return Waveform{WaveformKind::constant, value, 0.0, 0.0, 0, lower, upper};
}

Waveform Waveform::sinusoid(double base, double amplitude, double frequency_hz, double lower, double upper) {
  return Waveform{WaveformKind::sinusoid, base, amplitude, frequency_hz, 0, lower, upper};
}

Waveform Waveform::profile(double base, double amplitude, std::uint64_t seed, double lower, double upper) {
  return Waveform{WaveformKind::profile, base, amplitude, 0.0, seed, lower, upper};
}

double Track::length() const { return std::hypot(x1 - x0, y1 - y0); }

void ScanPlan::validate() const {
  if (tracks.empty()) throw std::invalid_argument("scan plan has no tracks");
  if (!(sample_period_s > 0.0)) throw std::invalid_argument("sample period must be > 0");
  for (const auto& t : tracks) {
    if (!(t.length() > 0.0)) throw std::invalid_argument("track length must be > 0");
    if (t.y0 != t.y1) throw std::invalid_argument("tracks must run parallel to the x axis");
  }
  if (tracks.size() > 1) {
    if (!(hatch_mm > 0.0)) throw std::invalid_argument("multi-track plan needs hatch > 0");
    for (std::size_t i = 1; i < tracks.size(); ++i) {
      if (std::abs(std::abs(tracks[i].y0 - tracks[i - 1].y0) - hatch_mm) > 1e-9)
        throw std::invalid_argument("adjacent tracks must be exactly one hatch apart");
    }
  }
  power.validate();
  speed.validate();
  if (!(speed.lower > 0.0)) throw std::invalid_argument("speed lower bound must be > 0");
}

std::vector<Track> raster_tracks(int n_tracks, double length_mm, double hatch_mm, bool bidirectional) {
  if (n_tracks < 1) throw std::invalid_argument("need at least one track");
  std::vector<Track> tracks;
  tracks.reserve(static_cast<std::size_t>(n_tracks));
  for (int i = 0; i < n_tracks; ++i) {
    const double y = i * hatch_mm;
    const bool reverse = bidirectional && (i % 2 == 1);
    tracks.push_back(reverse ? Track{length_mm, y, 0.0, y} : Track{0.0, y, length_mm, y});
  }
  return tracks;
}

ScanPlan make_case(int case_id, const DatagenDefaults& d) {
  if (case_id < 1 || case_id > kTrainingCaseCount) throw std::invalid_argument("case id must be in 1..9");

  const auto p_const = Waveform::constant(d.power_w, d.power_lower, d.power_upper);
  const auto v_const = Waveform::constant(d.speed_mm_s, d.speed_lower, d.speed_upper);
  const auto p_sin = Waveform::sinusoid(d.power_w, d.power_sin_amplitude, d.power_sin_hz, d.power_lower, d.power_upper);
  const auto v_sin = Waveform::sinusoid(d.speed_mm_s, d.speed_sin_amplitude, d.speed_sin_hz, d.speed_lower, d.speed_upper);
  const std::uint64_t case_seed = d.seed * 1000003ULL + static_cast<std::uint64_t>(case_id) * 7919ULL;
  const auto p_prof = Waveform::profile(d.power_w, d.power_profile_amplitude, case_seed, d.power_lower, d.power_upper);
  const auto v_prof =
      Waveform::profile(d.speed_mm_s, d.speed_profile_amplitude, case_seed ^ 0x5bd1e995ULL, d.speed_lower, d.speed_upper);

  ScanPlan plan;
  plan.name = "case" + std::to_string(case_id);
  plan.sample_period_s = d.sample_period_s;
  plan.bidirectional = true;
  plan.hatch_mm = d.hatch_mm;

  int tracks = 2;
  switch (case_id) {
    case 1: tracks = 1; plan.power = p_const; plan.speed = v_const; break;
    case 2: tracks = 1; plan.power = p_sin; plan.speed = v_const; break;
    case 3: tracks = 1; plan.power = p_const; plan.speed = v_sin; break;
    case 4: tracks = 1; plan.power = p_sin; plan.speed = v_sin; break;
    case 5: plan.power = p_const; plan.speed = v_const; plan.hatch_mm = 0.1; break;
    case 6: plan.power = p_const; plan.speed = v_const; plan.hatch_mm = 0.15; break;
    case 7: plan.power = p_const; plan.speed = v_const; plan.hatch_mm = 0.05; break;
    case 8: plan.power = p_sin; plan.speed = v_prof; plan.hatch_mm = 0.1; break;
    case 9: plan.power = p_prof; plan.speed = v_prof; plan.hatch_mm = 0.1; break;
    default: break;
  }
  plan.tracks = raster_tracks(tracks, d.track_length_mm, plan.hatch_mm, plan.bidirectional);
  return plan;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t total,
                                                                           std::size_t train_count,
                                                                           std::uint64_t seed) {
  if (train_count > total) throw std::invalid_argument("train_count exceeds number of samples");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first train_count slots become the training draw.
  for (std::size_t i = 0; i < train_count; ++i) {
    const std::size_t span = total - i;
    const std::size_t j = i + static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(span));
    std::swap(idx[i], idx[std::min(j, total - 1)]);
  }
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<std::size_t> valid(idx.begin() + static_cast<std::ptrdiff_t>(train_count), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());
  return {std::move(train), std::move(valid)};
}

void to_json(nlohmann::json& j, const Waveform& w) {
  j = {{"kind", to_string(w.kind)}, {"base", w.base},   {"amplitude", w.amplitude}, {"frequency_hz", w.frequency_hz},
       {"seed", w.seed},            {"lower", w.lower}, {"upper", w.upper}};
}

void from_json(const nlohmann::json& j, Waveform& w) {
  w.kind = waveform_kind_from_string(j.at("kind").get<std::string>());
  w.base = j.at("base").get<double>();
  w.amplitude = j.value("amplitude", 0.0);
  w.frequency_hz = j.value("frequency_hz", 0.0);
  w.seed = j.value("seed", std::uint64_t{0});
  w.lower = j.at("lower").get<double>();
  w.upper = j.at("upper").get<double>();
}

void to_json(nlohmann::json& j, const Track& t) { j = {{"start_mm", {t.x0, t.y0}}, {"end_mm", {t.x1, t.y1}}}; }

void from_json(const nlohmann::json& j, Track& t) {
  const auto s = j.at("start_mm").get<std::vector<double>>();
  const auto e = j.at("end_mm").get<std::vector<double>>();
  if (s.size() != 2 || e.size() != 2) throw std::invalid_argument("track points must have two coordinates");
  t = Track{s[0], s[1], e[0], e[1]};
}

void to_json(nlohmann::json& j, const ScanPlan& p) {
  j = {{"schema_version", 1},        {"name", p.name},   {"tracks", p.tracks},
       {"hatch_mm", p.hatch_mm},     {"bidirectional", p.bidirectional},
       {"power", p.power},           {"speed", p.speed}, {"sample_period_s", p.sample_period_s}};
}

void from_json(const nlohmann::json& j, ScanPlan& p) {
  p.name = j.value("name", std::string{});
  p.tracks = j.at("tracks").get<std::vector<Track>>();
  p.hatch_mm = j.value("hatch_mm", 0.1);
  p.bidirectional = j.value("bidirectional", true);
  p.power = j.at("power").get<Waveform>();
  p.speed = j.at("speed").get<Waveform>();
  p.sample_period_s = j.value("sample_period_s", 50e-6);
  p.validate();
}

void to_json(nlohmann::json& j, const DatagenDefaults& d) {
  j = {{"power_w", d.power_w},
       {"speed_mm_s", d.speed_mm_s},
       {"hatch_mm", d.hatch_mm},
       {"track_length_mm", d.track_length_mm},
       {"sample_period_s", d.sample_period_s},
       {"power_bounds", {d.power_lower, d.power_upper}},
       {"speed_bounds", {d.speed_lower, d.speed_upper}},
       {"power_sin", {{"amplitude", d.power_sin_amplitude}, {"frequency_hz", d.power_sin_hz}}},
       {"speed_sin", {{"amplitude", d.speed_sin_amplitude}, {"frequency_hz", d.speed_sin_hz}}},
       {"power_profile_amplitude", d.power_profile_amplitude},
       {"speed_profile_amplitude", d.speed_profile_amplitude},
       {"seed", d.seed}};
}

void from_json(const nlohmann::json& j, DatagenDefaults& d) {
  DatagenDefaults def;
  d.power_w = j.value("power_w", def.power_w);
  d.speed_mm_s = j.value("speed_mm_s", def.speed_mm_s);
  d.hatch_mm = j.value("hatch_mm", def.hatch_mm);
  d.track_length_mm = j.value("track_length_mm", def.track_length_mm);
  d.sample_period_s = j.value("sample_period_s", def.sample_period_s);
  if (j.contains("power_bounds")) {
    const auto b = j.at("power_bounds").get<std::vector<double>>();
    d.power_lower = b.at(0);
    d.power_upper = b.at(1);
  }
  if (j.contains("speed_bounds")) {
    const auto b = j.at("speed_bounds").get<std::vector<double>>();
    d.speed_lower = b.at(0);
    d.speed_upper = b.at(1);
  }
  if (j.contains("power_sin")) {
    d.power_sin_amplitude = j["power_sin"].value("amplitude", def.power_sin_amplitude);
    d.power_sin_hz = j["power_sin"].value("frequency_hz", def.power_sin_hz);
  }
  if (j.contains("speed_sin")) {
    d.speed_sin_amplitude = j["speed_sin"].value("amplitude", def.speed_sin_amplitude);
    d.speed_sin_hz = j["speed_sin"].value("frequency_hz", def.speed_sin_hz);
  }
  d.power_profile_amplitude = j.value("power_profile_amplitude", def.power_profile_amplitude);
  d.speed_profile_amplitude = j.value("speed_profile_amplitude", def.speed_profile_amplitude);
  d.seed = j.value("seed", def.seed);
}

}  // namespace meltpool
