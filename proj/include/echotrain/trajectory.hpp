#pragma once

#include "json.hpp"

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace echotrain {

/// Bloch components of one recorded class: σx = 2 Re⟨σ−⟩, σy = −2 Im⟨σ−⟩.
struct BlochSeries {
  std::size_t class_index = 0;
  double detuning = 0.0;
  std::vector<double> sx, sy, sz;
};

/// Sampled cavity field (and optionally per-class Bloch vectors).
struct Trajectory {
  std::vector<double> times;
  std::vector<double> photon_number;
  std::vector<double> alpha_re;
  std::vector<double> alpha_im;
  std::vector<BlochSeries> bloch;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  void push_back(double t, std::complex<double> alpha);

  /// Throws std::invalid_argument unless arrays agree in length and times
  /// are strictly increasing.
  void validate() const;
};

/// Trajectory built from a complex field sampled at the given times.
Trajectory trajectory_from_field(const std::vector<double> &times, const std::vector<std::complex<double>> &field);

/// CSV with header `t,re_alpha,im_alpha,n_photons`; numbers use the shortest
/// round-trip representation so the file reloads bit-exactly.
void write_trajectory_csv(const Trajectory &traj, const std::filesystem::path &path);
Trajectory read_trajectory_csv(const std::filesystem::path &path);

/// One CSV per recorded class (`t,sx,sy,sz`), named bloch_<index>.csv.
void write_bloch_csvs(const Trajectory &traj, const std::filesystem::path &dir);

/// Lossless binary container (little-endian doubles plus meta JSON).
void write_trajectory_binary(const Trajectory &traj, const std::filesystem::path &path);
Trajectory read_trajectory_binary(const std::filesystem::path &path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

} // namespace echotrain
