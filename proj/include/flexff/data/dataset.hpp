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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexff/common/binary.hpp"
#include "flexff/nn/model.hpp"
#include "flexff/nn/train.hpp"
#include "flexff/sim/plant.hpp"

namespace flexff::data {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Excitation campaign. Range lists hold one entry (applied to every joint) or
// one entry per joint.
struct CampaignSpec {
  int n_random = 100;
  int n_sinusoid = 400;
  int samples_per_traj = 2500;
  double sample_rate = 100.0;
  // Amplitude as a fraction of the joint's half range (hi - lo) / 2.
  std::vector<Range> amplitude_fraction{{0.1, 0.6}};
  std::vector<Range> frequency_hz{{0.1, 1.0}};
  // Low-pass cutoff of the random trajectories.
  std::vector<Range> cutoff_hz{{0.2, 1.0}};
  // Standard deviation of the white noise fed to the low-pass filter. Zero
  // yields constant random trajectories.
  double noise_std = 1.0;
  std::uint64_t rng_seed = 0;
};

void validate(const CampaignSpec& spec, const PlantConfig& plant);

nlohmann::json to_json(const CampaignSpec& spec);
CampaignSpec campaign_spec_from_json(const nlohmann::json& doc, CampaignSpec base = {});

enum class TrajectoryKind { kRandom, kSinusoid };
std::string to_string(TrajectoryKind kind);

struct TrajectoryPair {
  Trajectory q_d;  // commanded
  Trajectory q;    // plant response
  TrajectoryKind kind = TrajectoryKind::kSinusoid;

  bool operator==(const TrajectoryPair&) const = default;
};

// q_d,i(t) = center_i + amplitude_i sin(2π frequency_i t + phase_i)
struct SinusoidParams {
  Eigen::VectorXd center;
  Eigen::VectorXd amplitude;
  Eigen::VectorXd frequency;
  Eigen::VectorXd phase;
};

SinusoidParams draw_sinusoid(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t seed);
Trajectory render_sinusoid(const SinusoidParams& params, int samples, double sample_rate);

Trajectory gen_sinusoid(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t seed);

// Low-pass filtered white noise, shifted and scaled per joint so that its
// peak excursion around a drawn center equals a drawn amplitude.
Trajectory gen_random(const CampaignSpec& spec, const PlantConfig& plant, std::uint64_t seed);

// Zero-phase low-pass: a second-order Butterworth section run forward and
// backward twice. Exposed for tests.
Eigen::VectorXd lowpass(const Eigen::VectorXd& x, double cutoff_hz, double sample_rate);

// Trajectory i uses seed derive_seed(spec.rng_seed, i); the first n_random
// are random, the rest sinusoids. Runs on worker threads; the result order is
// fixed by index.
std::vector<TrajectoryPair> collect_campaign(const PlantConfig& plant, const CampaignSpec& spec,
                                             int threads = 0);

// Forward-model windows: input q_d(t .. t+T-1), target q(t+T). N - T samples.
std::vector<nn::WindowSample> make_forward_samples(const TrajectoryPair& pair, int T);
// Inverse-model windows: input q(t-T/2 .. t+T/2-1), target q_d(t). N - T + 1
// samples, T even.
std::vector<nn::WindowSample> make_inverse_samples(const TrajectoryPair& pair, int T);

// The same windows referenced into the pairs without copying.
nn::WindowSet forward_window_set(const std::vector<TrajectoryPair>& pairs, int T);
nn::WindowSet inverse_window_set(const std::vector<TrajectoryPair>& pairs, int T);

std::size_t forward_sample_count(std::size_t N, int T);
std::size_t inverse_sample_count(std::size_t N, int T);

struct Dataset {
  CampaignSpec spec;
  std::string plant_hash;
  nlohmann::json plant;  // full plant config used for collection
  std::vector<TrajectoryPair> pairs;
};

binary::Bytes encode_dataset(const Dataset& dataset);
Dataset decode_dataset(const binary::Bytes& bytes);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// Columns traj_id,t,joint,q_d,q with 1-based joints.
void export_csv(const std::vector<TrajectoryPair>& pairs, std::ostream& out);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

// Manipulability of the measured positions, every `stride`-th sample.
Histogram manipulability_histogram(const KinematicChain& chain, const std::vector<TrajectoryPair>& pairs,
                                   int bins, int stride = 1);

}  // namespace flexff::data
