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

#include "flexff/nn/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "flexff/common/binary.hpp"

namespace flexff::nn {
namespace {

using nlohmann::json;
using binary::put;

constexpr char kMagic[8] = {'F', 'L', 'X', 'F', 'F', 'C', 'K', 'P'};

struct ArrayRef {
  std::string name;
  std::size_t rows, cols;
  const double* data;
};

// Named arrays in storage order. Every parameter block is row-major in the
// flat vector, so names map directly onto contiguous slices.
template <typename Model>
std::vector<ArrayRef> arrays(Model& m) {
  const Topology& topo = m.topology();
  std::vector<ArrayRef> out;
  const char* gates[3] = {"z", "r", "h"};
  const std::size_t H = topo.hidden;
  for (int l = 0; l < topo.layers; ++l) {
    for (int d = 0; d < topo.directions(); ++d) {
      const auto v = m.layer(l, d);
      const std::string prefix = "layer" + std::to_string(l) + (d == 0 ? ".fwd." : ".bwd.");
      for (int g = 0; g < 3; ++g)
        out.push_back({prefix + "W_" + gates[g], H, static_cast<std::size_t>(v.input), v.w + g * H * v.input});
      for (int g = 0; g < 3; ++g)
        out.push_back({prefix + "U_" + gates[g], H, H, v.u + g * H * H});
      for (int g = 0; g < 3; ++g) out.push_back({prefix + "b_" + gates[g], H, 1, v.b + g * H});
    }
  }
  const std::size_t n = topo.n_joints;
  out.push_back({"readout.W", n, static_cast<std::size_t>(topo.feature_width()), m.readout_w()});
  out.push_back({"readout.b", n, 1, m.readout_b()});
  const Normalizer& norm = m.normalizer();
  out.push_back({"norm.in_mean", n, 1, norm.in_mean.data()});
  out.push_back({"norm.in_scale", n, 1, norm.in_scale.data()});
  out.push_back({"norm.out_mean", n, 1, norm.out_mean.data()});
  out.push_back({"norm.out_scale", n, 1, norm.out_scale.data()});
  return out;
}

json topology_json(const Topology& t) {
  return {{"direction", to_string(t.direction)}, {"layers", t.layers}, {"hidden", t.hidden},
          {"window", t.window},                  {"n_joints", t.n_joints}, {"cell", to_string(t.cell)},
          {"input_skip", t.input_skip}};
}

Topology topology_from_json(const json& j) {
  Topology t;
  const auto dir = j.at("direction").get<std::string>();
  require(dir == "unidirectional" || dir == "bidirectional", "corrupt_checkpoint", "unknown direction " + dir);
  t.direction = dir == "bidirectional" ? Direction::kBidirectional : Direction::kUnidirectional;
  t.layers = j.at("layers").get<int>();
  t.hidden = j.at("hidden").get<int>();
  t.window = j.at("window").get<int>();
  t.n_joints = j.at("n_joints").get<int>();
  const auto cell = j.value("cell", std::string("gru"));
  require(cell == "gru" || cell == "linear_surrogate", "corrupt_checkpoint", "unknown cell " + cell);
  t.cell = cell == "gru" ? CellKind::kGru : CellKind::kLinearSurrogate;
  t.input_skip = j.value("input_skip", false);
  validate(t);
  return t;
}

std::string describe(const Topology& t) { return topology_json(t).dump(); }

}  // namespace

std::string to_string(Direction d) {
  return d == Direction::kBidirectional ? "bidirectional" : "unidirectional";
}

std::string to_string(CellKind c) { return c == CellKind::kGru ? "gru" : "linear_surrogate"; }

std::vector<std::uint8_t> save_checkpoint(const RecurrentModel& model) {
  const auto list = arrays(model);
  json entries = json::array();
  std::size_t offset = 0;
  for (const auto& a : list) {
    entries.push_back({{"name", a.name}, {"shape", {a.rows, a.cols}}, {"offset", offset}});
    offset += a.rows * a.cols;
  }
  const std::string header = json{{"topology", topology_json(model.topology())}, {"arrays", entries}}.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& a : list) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(a.data);
    out.insert(out.end(), p, p + a.rows * a.cols * sizeof(double));
  }
  return out;
}

RecurrentModel load_checkpoint(const std::vector<std::uint8_t>& bytes, const std::optional<Topology>& expected) {
  binary::Reader in(bytes, "corrupt_checkpoint");
  require(in.match(kMagic, sizeof kMagic), "corrupt_checkpoint", "bad magic bytes");
  const auto version = in.get<std::uint32_t>();
  require(version == kCheckpointVersion, "version_mismatch",
          "checkpoint version " + std::to_string(version) + " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto header_len = in.get<std::uint64_t>();
  json header;
  try {
    header = json::parse(in.string(header_len));
  } catch (const json::exception& e) {
    throw Error("corrupt_checkpoint", std::string("unreadable header: ") + e.what());
  }

  const Topology topo = topology_from_json(header.at("topology"));
  if (expected) {
    require(topo == *expected, "topology_mismatch",
            "checkpoint has " + describe(topo) + ", expected " + describe(*expected));
  }
  RecurrentModel model(topo);
  Normalizer norm = Normalizer::identity(topo.n_joints);
  // Build the destination list against a writable model, then route the
  // normaliser arrays to the local copy.
  auto dest = arrays(model);
  const auto& entries = header.at("arrays");
  require(entries.size() == dest.size(), "topology_mismatch", "array count does not match topology");
  const std::size_t payload = in.remaining();
  for (std::size_t i = 0; i < dest.size(); ++i) {
    const auto& e = entries[i];
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    require(e.at("name").get<std::string>() == dest[i].name && shape.size() == 2 &&
                shape[0] == dest[i].rows && shape[1] == dest[i].cols,
            "topology_mismatch", "array '" + e.at("name").get<std::string>() + "' does not match topology");
    const std::size_t off = e.at("offset").get<std::size_t>() * sizeof(double);
    const std::size_t len = dest[i].rows * dest[i].cols * sizeof(double);
    require(off + len <= payload, "corrupt_checkpoint", "truncated checkpoint payload");
    double* target = const_cast<double*>(dest[i].data);
    if (dest[i].name == "norm.in_mean") target = norm.in_mean.data();
    if (dest[i].name == "norm.in_scale") target = norm.in_scale.data();
    if (dest[i].name == "norm.out_mean") target = norm.out_mean.data();
    if (dest[i].name == "norm.out_scale") target = norm.out_scale.data();
    std::memcpy(target, in.here() + off, len);
  }
  model.set_normalizer(std::move(norm));
  return model;
}

void write_checkpoint(const RecurrentModel& model, const std::filesystem::path& path) {
  binary::write_file(path, save_checkpoint(model));
}

RecurrentModel read_checkpoint(const std::filesystem::path& path, const std::optional<Topology>& expected) {
  return load_checkpoint(binary::read_file(path, "missing_checkpoint"), expected);
}

}  // namespace flexff::nn
