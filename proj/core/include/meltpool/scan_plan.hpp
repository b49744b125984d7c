#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace meltpool {

enum class WaveformKind { constant, sinusoid, profile };

std::string to_string(WaveformKind kind);
WaveformKind waveform_kind_from_string(const std::string& name);

/// Power or speed command as a function of time since scan start.
///
/// `profile` is a seeded band-limited curve: four sinusoids with frequencies
/// in [100, 1000] Hz and random phases, summed and scaled by amplitude / 2.
/// Every kind is clamped to [lower, upper].
struct Waveform {
  WaveformKind kind = WaveformKind::constant;
  double base = 0.0;
  double amplitude = 0.0;
  double frequency_hz = 0.0;
  std::uint64_t seed = 0;
  double lower = 0.0;
  double upper = 0.0;

  double eval(double t_s) const;
  void validate() const;

  static Waveform constant(double value, double lower, double upper);
  static Waveform sinusoid(double base, double amplitude, double frequency_hz, double lower, double upper);
  static Waveform profile(double base, double amplitude, std::uint64_t seed, double lower, double upper);
};

inline double waveform_eval(const Waveform& w, double t_s) { return w.eval(t_s); }

/// Straight scan segment on the top surface (mm). Tracks run parallel to x.
struct Track {
  double x0 = 0.0, y0 = 0.0;
  double x1 = 0.0, y1 = 0.0;

  double length() const;
  /// +1 when scanning toward +x, -1 otherwise.
  double direction() const { return x1 >= x0 ? 1.0 : -1.0; }
};

struct ScanPlan {
  std::string name;
  std::vector<Track> tracks;
  double hatch_mm = 0.1;
  bool bidirectional = true;
  Waveform power;
  Waveform speed;
  double sample_period_s = 50e-6;

  void validate() const;
};

/// `n_tracks` parallel tracks of `length_mm` starting at the origin, stacked in
/// +y by `hatch_mm`; alternate tracks are reversed when `bidirectional`.
std::vector<Track> raster_tracks(int n_tracks, double length_mm, double hatch_mm, bool bidirectional);

struct DatagenDefaults {
  double power_w = 250.0;
  double speed_mm_s = 800.0;
  double hatch_mm = 0.1;
  double track_length_mm = 5.0;
  double sample_period_s = 50e-6;

  double power_lower = 0.0, power_upper = 350.0;
  double speed_lower = 400.0, speed_upper = 1200.0;

  double power_sin_amplitude = 50.0, power_sin_hz = 500.0;
  double speed_sin_amplitude = 200.0, speed_sin_hz = 300.0;
  double power_profile_amplitude = 80.0;
  double speed_profile_amplitude = 200.0;

  std::uint64_t seed = 2021;
};

inline constexpr int kTrainingCaseCount = 9;

/// One of the nine training experiments (single tracks 1-4, double tracks 5-9).
ScanPlan make_case(int case_id, const DatagenDefaults& defaults = {});

/// Disjoint uniform split of indices [0, total) into `train_count` sorted
/// training indices and the sorted complement. Deterministic for a seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t total,
                                                                           std::size_t train_count,
                                                                           std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> subsample_split(const std::vector<T>& samples, std::size_t train_count,
                                                          std::uint64_t seed) {
  const auto [train_idx, valid_idx] = split_indices(samples.size(), train_count, seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(train_idx.size());
  out.second.reserve(valid_idx.size());
  for (auto i : train_idx) out.first.push_back(samples[i]);
  for (auto i : valid_idx) out.second.push_back(samples[i]);
  return out;
}

void to_json(nlohmann::json& j, const Waveform& w);
void from_json(const nlohmann::json& j, Waveform& w);
void to_json(nlohmann::json& j, const Track& t);
void from_json(const nlohmann::json& j, Track& t);
void to_json(nlohmann::json& j, const ScanPlan& p);
void from_json(const nlohmann::json& j, ScanPlan& p);
void to_json(nlohmann::json& j, const DatagenDefaults& d);
void from_json(const nlohmann::json& j, DatagenDefaults& d);

}  // namespace meltpool
