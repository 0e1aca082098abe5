#include "echotrain/trajectory.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace echotrain {

namespace {

constexpr std::array<char, 4> binary_magic{'E', 'T', 'R', 'J'};
constexpr std::uint32_t binary_version = 1;

static_assert(std::endian::native == std::endian::little, "binary trajectory format assumes little-endian hosts");

template <class T> void put(std::ostream &os, const T &v) { os.write(reinterpret_cast<const char *>(&v), sizeof(T)); }

template <class T> T get(std::istream &is)
{
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T))) throw std::runtime_error("truncated binary trajectory");
  return v;
}

void put_array(std::ostream &os, const std::vector<double> &v)
{
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_array(std::istream &is)
{
  const auto n = get<std::uint64_t>(is);
  std::vector<double> v(n);
  if (!is.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw std::runtime_error("truncated binary trajectory");
  return v;
}

double parse_double(std::string_view s)
{
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed number '" + std::string(s) + "'");
  return v;
}

} // namespace

void Trajectory::push_back(double t, std::complex<double> alpha)
{
  times.push_back(t);
  alpha_re.push_back(alpha.real());
  alpha_im.push_back(alpha.imag());
  photon_number.push_back(std::norm(alpha));
}

void Trajectory::validate() const
{
  const auto n = times.size();
  if (photon_number.size() != n || alpha_re.size() != n || alpha_im.size() != n)
    throw std::invalid_argument("trajectory arrays differ in length");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("trajectory times are not strictly increasing");
  }
  for (const auto &b : bloch) {
    if (b.sx.size() != n || b.sy.size() != n || b.sz.size() != n)
      throw std::invalid_argument("bloch record length differs from trajectory length");
  }
}

Trajectory trajectory_from_field(const std::vector<double> &times, const std::vector<std::complex<double>> &field)
{
  if (times.size() != field.size()) throw std::invalid_argument("times and field differ in length");
  Trajectory traj;
  for (std::size_t i = 0; i < times.size(); ++i) traj.push_back(times[i], field[i]);
  return traj;
}

std::string format_double(double v)
{
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

void write_trajectory_csv(const Trajectory &traj, const std::filesystem::path &path)
{
  traj.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "t,re_alpha,im_alpha,n_photons\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    os << format_double(traj.times[i]) << ',' << format_double(traj.alpha_re[i]) << ','
       << format_double(traj.alpha_im[i]) << ',' << format_double(traj.photon_number[i]) << '\n';
  }
}

Trajectory read_trajectory_csv(const std::filesystem::path &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "t,re_alpha,im_alpha,n_photons")
    throw std::runtime_error(path.string() + ": unexpected CSV header");
  Trajectory traj;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 4> cols{};
    std::size_t start = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto comma = line.find(',', start);
      if ((c < 3) == (comma == std::string::npos))
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
      cols[c] = parse_double(std::string_view(line).substr(start, comma - start));
      start = comma + 1;
    }
    traj.times.push_back(cols[0]);
    traj.alpha_re.push_back(cols[1]);
    traj.alpha_im.push_back(cols[2]);
    traj.photon_number.push_back(cols[3]);
  }
  traj.validate();
  return traj;
}

void write_bloch_csvs(const Trajectory &traj, const std::filesystem::path &dir)
{
  traj.validate();
  for (const auto &b : traj.bloch) {
    const auto path = dir / ("bloch_" + std::to_string(b.class_index) + ".csv");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "t,sx,sy,sz\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
      os << format_double(traj.times[i]) << ',' << format_double(b.sx[i]) << ',' << format_double(b.sy[i]) << ','
         << format_double(b.sz[i]) << '\n';
    }
  }
}

void write_trajectory_binary(const Trajectory &traj, const std::filesystem::path &path)
{
  traj.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(binary_magic.data(), binary_magic.size());
  put(os, binary_version);
  put_array(os, traj.times);
  put_array(os, traj.alpha_re);
  put_array(os, traj.alpha_im);
  put_array(os, traj.photon_number);
  put<std::uint64_t>(os, traj.bloch.size());
  for (const auto &b : traj.bloch) {
    put<std::uint64_t>(os, b.class_index);
    put(os, b.detuning);
    put_array(os, b.sx);
    put_array(os, b.sy);
    put_array(os, b.sz);
  }
  const std::string meta = traj.meta.dump();
  put<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
}

Trajectory read_trajectory_binary(const std::filesystem::path &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != binary_magic)
    throw std::runtime_error(path.string() + ": not a binary trajectory");
  if (get<std::uint32_t>(is) != binary_version) throw std::runtime_error(path.string() + ": unsupported version");
  Trajectory traj;
  traj.times = get_array(is);
  traj.alpha_re = get_array(is);
  traj.alpha_im = get_array(is);
  traj.photon_number = get_array(is);
  const auto n_bloch = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_bloch; ++i) {
    BlochSeries b;
    b.class_index = get<std::uint64_t>(is);
    b.detuning = get<double>(is);
    b.sx = get_array(is);
    b.sy = get_array(is);
    b.sz = get_array(is);
    traj.bloch.push_back(std::move(b));
  }
  const auto meta_size = get<std::uint64_t>(is);
  std::string meta(meta_size, '\0');
  if (!is.read(meta.data(), static_cast<std::streamsize>(meta_size)))
    throw std::runtime_error("truncated binary trajectory");
  traj.meta = nlohmann::json::parse(meta);
  traj.validate();
  return traj;
}

} // namespace echotrain
