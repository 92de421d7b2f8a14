// Copyright 2026 The flexff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "flexff/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <ostream>
#include <thread>

#include "flexff/common/rng.hpp"
#include "flexff/sim/config_io.hpp"
#include "flexff/sim/kinematics.hpp"

namespace flexff::data {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'F', 'L', 'X', 'F', 'F', 'D', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

const Range& range_for(const std::vector<Range>& ranges, int joint) {
  return ranges.size() == 1 ? ranges.front() : ranges[static_cast<std::size_t>(joint)];
}

void check_ranges(const std::vector<Range>& ranges, int n, const char* key, double lo_bound, double hi_bound) {
  require(ranges.size() == 1 || ranges.size() == static_cast<std::size_t>(n), "infeasible_range",
          std::string(key) + " needs one range or one per joint");
  for (const Range& r : ranges) {
    require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, "infeasible_range",
            std::string(key) + " requires lo <= hi");
    require(r.lo >= lo_bound && r.hi <= hi_bound, "infeasible_range",
            std::string(key) + " outside [" + std::to_string(lo_bound) + ", " + std::to_string(hi_bound) + "]");
  }
}

// Peak amplitude and center per joint, both keeping c ± A inside the limits.
void draw_envelope(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t& rng,
                   Eigen::VectorXd& center, Eigen::VectorXd& amplitude) {
  const int n = plant.n_joints;
  center.resize(n);
  amplitude.resize(n);
  for (int j = 0; j < n; ++j) {
    const double lo = plant.joint_limits_lo[j], hi = plant.joint_limits_hi[j];
    const Range& a = range_for(spec.amplitude_fraction, j);
    amplitude[j] = next_uniform(rng, a.lo, a.hi) * 0.5 * (hi - lo);
    center[j] = next_uniform(rng, lo + amplitude[j], hi - amplitude[j]);
  }
}

json ranges_json(const std::vector<Range>& ranges) {
  json out = json::array();
  for (const Range& r : ranges) out.push_back({r.lo, r.hi});
  return out;
}

std::vector<Range> ranges_from_json(const json& j) {
  std::vector<Range> out;
  if (j.is_array() && j.size() == 2 && j[0].is_number()) return {{j[0].get<double>(), j[1].get<double>()}};
  require(j.is_array(), "invalid_config", "range lists must be [lo, hi] or a list of such pairs");
  for (const auto& r : j) {
    require(r.is_array() && r.size() == 2, "invalid_config", "range entries must be [lo, hi]");
    out.push_back({r[0].get<double>(), r[1].get<double>()});
  }
  return out;
}

}  // namespace

void validate(const CampaignSpec& spec, const PlantConfig& plant) {
  validate(plant);
  require(spec.n_random >= 0 && spec.n_sinusoid >= 0, "infeasible_range", "trajectory counts must be >= 0");
  require(spec.samples_per_traj >= 1, "infeasible_range", "samples_per_traj must be >= 1");
  require(std::abs(spec.sample_rate * plant.dt - 1.0) < 1e-9, "rate_mismatch",
          "campaign sample_rate must equal 1/dt of the plant");
  const double nyquist = 0.5 * spec.sample_rate;
  check_ranges(spec.amplitude_fraction, plant.n_joints, "amplitude_fraction", 0.0, 1.0);
  check_ranges(spec.frequency_hz, plant.n_joints, "frequency_hz", 0.0, nyquist);
  check_ranges(spec.cutoff_hz, plant.n_joints, "cutoff_hz", 0.0, nyquist);
  for (const Range& r : spec.cutoff_hz) require(r.lo > 0.0, "infeasible_range", "cutoff_hz must be positive");
  require(spec.noise_std >= 0.0 && std::isfinite(spec.noise_std), "infeasible_range", "noise_std must be >= 0");
}

json to_json(const CampaignSpec& s) {
  return {{"n_random", s.n_random},
          {"n_sinusoid", s.n_sinusoid},
          {"samples_per_traj", s.samples_per_traj},
          {"sample_rate", s.sample_rate},
          {"amplitude_fraction", ranges_json(s.amplitude_fraction)},
          {"frequency_hz", ranges_json(s.frequency_hz)},
          {"cutoff_hz", ranges_json(s.cutoff_hz)},
          {"noise_std", s.noise_std},
          {"rng_seed", s.rng_seed}};
}

CampaignSpec campaign_spec_from_json(const json& doc, CampaignSpec s) {
  try {
    s.n_random = doc.value("n_random", s.n_random);
    s.n_sinusoid = doc.value("n_sinusoid", s.n_sinusoid);
    s.samples_per_traj = doc.value("samples_per_traj", s.samples_per_traj);
    s.sample_rate = doc.value("sample_rate", s.sample_rate);
    if (doc.contains("amplitude_fraction")) s.amplitude_fraction = ranges_from_json(doc["amplitude_fraction"]);
    if (doc.contains("frequency_hz")) s.frequency_hz = ranges_from_json(doc["frequency_hz"]);
    if (doc.contains("cutoff_hz")) s.cutoff_hz = ranges_from_json(doc["cutoff_hz"]);
    s.noise_std = doc.value("noise_std", s.noise_std);
    s.rng_seed = doc.value("rng_seed", s.rng_seed);
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("campaign: ") + e.what());
  }
  return s;
}

std::string to_string(TrajectoryKind kind) { return kind == TrajectoryKind::kRandom ? "random" : "sinusoid"; }

SinusoidParams draw_sinusoid(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t seed) {
  validate(spec, plant);
  std::uint64_t rng = seed;
  SinusoidParams p;
  draw_envelope(spec, plant, rng, p.center, p.amplitude);
  const int n = plant.n_joints;
  p.frequency.resize(n);
  p.phase.resize(n);
  for (int j = 0; j < n; ++j) {
    const Range& f = range_for(spec.frequency_hz, j);
    p.frequency[j] = next_uniform(rng, f.lo, f.hi);
    p.phase[j] = next_uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  return p;
}

Trajectory render_sinusoid(const SinusoidParams& p, int samples, double sample_rate) {
  const auto n = p.center.size();
  Trajectory out(n, samples, sample_rate);
  for (int t = 0; t < samples; ++t) {
    const double time = t / sample_rate;
    for (Eigen::Index j = 0; j < n; ++j)
      out.data(j, t) = p.center[j] + p.amplitude[j] * std::sin(2.0 * std::numbers::pi * p.frequency[j] * time + p.phase[j]);
  }
  return out;
}

Trajectory gen_sinusoid(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t seed) {
  return render_sinusoid(draw_sinusoid(spec, plant, seed), spec.samples_per_traj, spec.sample_rate);
}

Eigen::VectorXd lowpass(const Eigen::VectorXd& x, double cutoff_hz, double sample_rate) {
  // Bilinear transform with pre-warping.
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  const double b0 = k * k * norm, b1 = 2.0 * b0, b2 = b0;
  const double a1 = 2.0 * (k * k - 1.0) * norm, a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  Eigen::VectorXd y = x;
  const auto pass = [&](auto index) {
    const Eigen::Index N = y.size();
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      double& v = y[index(i, N)];
      const double out = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = out;
      v = out;
    }
  };
  const auto fwd = [](Eigen::Index i, Eigen::Index) { return i; };
  const auto bwd = [](Eigen::Index i, Eigen::Index N) { return N - 1 - i; };
  for (int round = 0; round < 2; ++round) {
    pass(fwd);
    pass(bwd);
  }
  return y;
}

Trajectory gen_random(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t seed) {
  validate(spec, plant);
  std::uint64_t rng = seed;
  Eigen::VectorXd center, amplitude;
  draw_envelope(spec, plant, rng, center, amplitude);
  const int n = plant.n_joints, N = spec.samples_per_traj;
  Trajectory out(n, N, spec.sample_rate);
  for (int j = 0; j < n; ++j) {
    const Range& c = range_for(spec.cutoff_hz, j);
    const double cutoff = next_uniform(rng, c.lo, c.hi);
    // Padding on both sides absorbs the filter start-up transients.
    const int pad = static_cast<int>(std::ceil(4.0 * spec.sample_rate / cutoff));
    Eigen::VectorXd noise(N + 2 * pad);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = spec.noise_std * next_normal(rng);
    const Eigen::VectorXd smooth = lowpass(noise, cutoff, spec.sample_rate).segment(pad, N);
    const Eigen::VectorXd dev = smooth.array() - smooth.mean();
    const double peak = dev.cwiseAbs().maxCoeff();
    if (peak > 0.0) {
      out.data.row(j) = (center[j] + (amplitude[j] / peak) * dev.array()).matrix().transpose();
    } else {
      out.data.row(j).setConstant(center[j]);
    }
  }
  return out;
}

std::vector<TrajectoryPair> collect_campaign(const PlantConfig& plant, const CampaignSpec& spec, int threads) {
  validate(spec, plant);
  const int total = spec.n_random + spec.n_sinusoid;
  std::vector<TrajectoryPair> pairs(static_cast<std::size_t>(total));
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(total, 1));

  std::atomic<int> next{0};
  std::mutex failure_mu;
  std::exception_ptr failure;
  int failed_index = total;
  const auto work = [&] {
    for (int i = next++; i < total; i = next++) {
      try {
        TrajectoryPair& p = pairs[static_cast<std::size_t>(i)];
        const std::uint64_t seed = derive_seed(spec.rng_seed, static_cast<std::uint64_t>(i));
        p.kind = i < spec.n_random ? TrajectoryKind::kRandom : TrajectoryKind::kSinusoid;
        p.q_d = p.kind == TrajectoryKind::kRandom ? gen_random(spec, plant, seed) : gen_sinusoid(spec, plant, seed);
        p.q = simulate(plant, p.q_d);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      throw Error(e.code(), "trajectory " + std::to_string(failed_index) + ": " + e.detail());
    }
  }
  return pairs;
}

std::size_t forward_sample_count(std::size_t N, int T) {
  return N > static_cast<std::size_t>(T) ? N - static_cast<std::size_t>(T) : 0;
}

std::size_t inverse_sample_count(std::size_t N, int T) {
  return N >= static_cast<std::size_t>(T) ? N - static_cast<std::size_t>(T) + 1 : 0;
}

namespace {

void check_pair(const TrajectoryPair& p) {
  require(p.q_d.data.rows() == p.q.data.rows() && p.q_d.data.cols() == p.q.data.cols() &&
              p.q_d.sample_rate == p.q.sample_rate,
          "shape_mismatch", "q_d and q must have equal shape and rate");
}

void check_forward(const TrajectoryPair& p, int T) {
  check_pair(p);
  require(T >= 1, "invalid_window", "window must be >= 1");
  require(p.q_d.length() > T, "sequence_too_short",
          "forward windows need N > T (N = " + std::to_string(p.q_d.length()) + ", T = " + std::to_string(T) + ")");
}

void check_inverse(const TrajectoryPair& p, int T) {
  check_pair(p);
  require(T >= 2 && T % 2 == 0, "invalid_window", "inverse windows need an even T >= 2");
  require(p.q.length() >= T, "sequence_too_short",
          "inverse windows need N >= T (N = " + std::to_string(p.q.length()) + ", T = " + std::to_string(T) + ")");
}

}  // namespace

std::vector<nn::WindowSample> make_forward_samples(const TrajectoryPair& pair, int T) {
  check_forward(pair, T);
  std::vector<nn::WindowSample> out;
  const Eigen::Index N = pair.q_d.length();
  out.reserve(static_cast<std::size_t>(N - T));
  for (Eigen::Index t = 0; t + T < N; ++t) out.push_back({pair.q_d.data.middleCols(t, T), pair.q.data.col(t + T)});
  return out;
}

std::vector<nn::WindowSample> make_inverse_samples(const TrajectoryPair& pair, int T) {
  check_inverse(pair, T);
  std::vector<nn::WindowSample> out;
  const Eigen::Index N = pair.q.length(), half = T / 2;
  out.reserve(static_cast<std::size_t>(N - T + 1));
  for (Eigen::Index t = half; t + half <= N; ++t)
    out.push_back({pair.q.data.middleCols(t - half, T), pair.q_d.data.col(t)});
  return out;
}

nn::WindowSet forward_window_set(const std::vector<TrajectoryPair>& pairs, int T) {
  nn::WindowSet set;
  set.window = T;
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    check_forward(pairs[s], T);
    set.inputs.push_back(pairs[s].q_d.data);
    set.targets.push_back(pairs[s].q.data);
    const auto N = static_cast<std::uint32_t>(pairs[s].q_d.length());
    for (std::uint32_t t = 0; t + T < N; ++t)
      set.refs.push_back({static_cast<std::uint32_t>(s), t, t + static_cast<std::uint32_t>(T)});
  }
  return set;
}

nn::WindowSet inverse_window_set(const std::vector<TrajectoryPair>& pairs, int T) {
  nn::WindowSet set;
  set.window = T;
  const auto half = static_cast<std::uint32_t>(T / 2);
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    check_inverse(pairs[s], T);
    set.inputs.push_back(pairs[s].q.data);
    set.targets.push_back(pairs[s].q_d.data);
    const auto N = static_cast<std::uint32_t>(pairs[s].q.length());
    for (std::uint32_t t = half; t + half <= N; ++t) set.refs.push_back({static_cast<std::uint32_t>(s), t - half, t});
  }
  return set;
}

// Container layout:
//   "FLXFFDST" magic, u32 version, u64 header length, JSON header
//   {spec, plant_hash, plant, trajectories: [{kind, n_joints, length, sample_rate}]},
//   then per trajectory the q_d block followed by the q block, each column-major doubles.
binary::Bytes encode_dataset(const Dataset& d) {
  json trajectories = json::array();
  for (const auto& p : d.pairs) {
    check_pair(p);
    trajectories.push_back({{"kind", to_string(p.kind)},
                            {"n_joints", p.q_d.n_joints()},
                            {"length", p.q_d.length()},
                            {"sample_rate", p.q_d.sample_rate}});
  }
  const std::string header =
      json{{"spec", to_json(d.spec)}, {"plant_hash", d.plant_hash}, {"plant", d.plant}, {"trajectories", trajectories}}
          .dump();
  binary::Bytes out(kMagic, kMagic + sizeof kMagic);
  binary::put<std::uint32_t>(out, kVersion);
  binary::put<std::uint64_t>(out, header.size());
  binary::put_raw(out, header.data(), header.size());
  for (const auto& p : d.pairs) {
    binary::put_raw(out, p.q_d.data.data(), static_cast<std::size_t>(p.q_d.data.size()) * sizeof(double));
    binary::put_raw(out, p.q.data.data(), static_cast<std::size_t>(p.q.data.size()) * sizeof(double));
  }
  return out;
}

Dataset decode_dataset(const binary::Bytes& bytes) {
  binary::Reader in(bytes, "corrupt_dataset");
  require(in.match(kMagic, sizeof kMagic), "corrupt_dataset", "bad magic bytes");
  const auto version = in.get<std::uint32_t>();
  require(version == kVersion, "version_mismatch",
          "dataset version " + std::to_string(version) + " (expected " + std::to_string(kVersion) + ")");
  const auto header_len = in.get<std::uint64_t>();
  Dataset d;
  std::vector<std::pair<TrajectoryKind, std::array<Eigen::Index, 2>>> shapes;
  std::vector<double> rates;
  try {
    const json header = json::parse(in.string(header_len));
    d.spec = campaign_spec_from_json(header.at("spec"));
    d.plant_hash = header.at("plant_hash").get<std::string>();
    d.plant = header.at("plant");
    for (const auto& t : header.at("trajectories")) {
      const auto kind = t.at("kind").get<std::string>() == "random" ? TrajectoryKind::kRandom : TrajectoryKind::kSinusoid;
      shapes.push_back({kind, {t.at("n_joints").get<Eigen::Index>(), t.at("length").get<Eigen::Index>()}});
      rates.push_back(t.at("sample_rate").get<double>());
    }
  } catch (const json::exception& e) {
    throw Error("corrupt_dataset", std::string("unreadable header: ") + e.what());
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto [rows, cols] = shapes[i].second;
    require(rows >= 1 && cols >= 1, "corrupt_dataset", "invalid trajectory shape");
    TrajectoryPair p;
    p.kind = shapes[i].first;
    p.q_d = Trajectory(rows, cols, rates[i]);
    p.q = Trajectory(rows, cols, rates[i]);
    const std::size_t len = static_cast<std::size_t>(rows * cols) * sizeof(double);
    in.read(p.q_d.data.data(), len);
    in.read(p.q.data.data(), len);
    d.pairs.push_back(std::move(p));
  }
  require(in.remaining() == 0, "corrupt_dataset", "trailing bytes after trajectory payload");
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  binary::write_file(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(binary::read_file(path, "missing_dataset"));
}

void export_csv(const std::vector<TrajectoryPair>& pairs, std::ostream& out) {
  out << "traj_id,t,joint,q_d,q\n";
  const auto precision = out.precision(17);
  for (std::size_t id = 0; id < pairs.size(); ++id) {
    const auto& p = pairs[id];
    for (Eigen::Index t = 0; t < p.q_d.length(); ++t)
      for (Eigen::Index j = 0; j < p.q_d.n_joints(); ++j)
        out << id << ',' << t << ',' << j + 1 << ',' << p.q_d.data(j, t) << ',' << p.q.data(j, t) << '\n';
  }
  out.precision(precision);
}

Histogram manipulability_histogram(const KinematicChain& chain, const std::vector<TrajectoryPair>& pairs, int bins,
                                   int stride) {
  require(bins >= 1 && stride >= 1, "invalid_argument", "bins and stride must be >= 1");
  std::vector<double> values;
  for (const auto& p : pairs)
    for (Eigen::Index t = 0; t < p.q.length(); t += stride) values.push_back(manipulability(chain, p.q.sample(t)));
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double hi = values.empty() ? 1.0 : *std::max_element(values.begin(), values.end());
  const double width = hi > 0.0 ? hi / bins : 1.0 / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b * width);
  for (double v : values) {
    const auto b = std::min(static_cast<std::size_t>(v / width), static_cast<std::size_t>(bins - 1));
    ++h.counts[b];
  }
  return h;
}

}  // namespace flexff::data
