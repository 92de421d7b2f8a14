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

#include "engine.hpp"

#include <algorithm>
#include <cmath>

#include "flexff/simd/kernels.hpp"

namespace flexff::nn::detail {
namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace

Engine::Engine(const RecurrentModel& model, int batch)
    : model_(model), topo_(model.topology()), batch_(batch) {
  require(batch >= 1, "invalid_batch", "engine batch must be >= 1");
  const std::size_t T = topo_.window, B = batch, H = topo_.hidden, Hd = topo_.feature_width();
  x_.assign(T * B * topo_.n_joints, 0.0);
  hid_.assign(topo_.layers, std::vector<double>(T * B * Hd, 0.0));
  act_.resize(topo_.layers);
  mask_.resize(topo_.layers);
  gates_.resize(topo_.layers);
  for (auto& per_dir : gates_) {
    per_dir.resize(topo_.directions());
    for (Gates& g : per_dir) {
      g.z.assign(T * B * H, 0.0);
      g.r.assign(T * B * H, 0.0);
      g.n.assign(T * B * H, 0.0);
      g.rh.assign(T * B * H, 0.0);
    }
  }
  a_.assign(B * 3 * H, 0.0);
  pred_.assign(B * topo_.n_joints, 0.0);
  dz_.assign(B * H, 0.0);
  dhp_.assign(B * H, 0.0);
  drh_.assign(B * H, 0.0);
}

std::pair<int, int> Engine::span(int layer, int dir) const {
  const int last = topo_.window - 1;
  const bool top = layer == topo_.layers - 1;
  if (topo_.direction == Direction::kUnidirectional) return {0, last};
  const int c = topo_.read_position();
  if (dir == 0) return {0, top ? c : last};
  return {last, top ? c : 0};
}

const double* Engine::layer_input(int layer, int t) const {
  const std::size_t B = batch_;
  if (layer == 0) return x_.data() + t * B * topo_.n_joints;
  const auto& src = dropout_ ? act_[layer - 1] : hid_[layer - 1];
  return src.data() + t * B * topo_.feature_width();
}

int Engine::layer_input_ld(int layer) const {
  return layer == 0 ? topo_.n_joints : topo_.feature_width();
}

const double* Engine::features() const {
  const int top = topo_.layers - 1;
  const auto& src = dropout_ ? act_[top] : hid_[top];
  return src.data() + static_cast<std::size_t>(topo_.read_position()) * batch_ * topo_.feature_width();
}

void gru_step_forward(const GruLayerView<const double>& view, std::size_t B, const double* x,
                      std::size_t ldx, const double* h_prev, std::size_t ldh, double* h_out,
                      std::size_t ldo, double* z, double* r, double* n, double* rh, double* a,
                      CellKind cell) {
  const auto& k = simd::kernels();
  const std::size_t H = view.hidden, in = view.input, G = 3 * H;

  for (std::size_t b = 0; b < B; ++b) std::copy(view.b, view.b + G, a + b * G);
  k.gemm_nt(B, G, in, x, ldx, view.w, in, a, G, true);
  if (h_prev != nullptr) k.gemm_nt(B, 2 * H, H, h_prev, ldh, view.u, H, a, G, true);

  const bool linear = cell == CellKind::kLinearSurrogate;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < H; ++i) {
      const double hp = h_prev != nullptr ? h_prev[b * ldh + i] : 0.0;
      const double zi = linear ? 1.0 : sigmoid(a[b * G + i]);
      const double ri = linear ? 1.0 : sigmoid(a[b * G + H + i]);
      z[b * H + i] = zi;
      r[b * H + i] = ri;
      rh[b * H + i] = ri * hp;
    }
  }
  if (h_prev != nullptr) k.gemm_nt(B, H, H, rh, H, view.u + 2 * H * H, H, a + 2 * H, G, true);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < H; ++i) {
      const double an = a[b * G + 2 * H + i];
      const double ni = linear ? an : std::tanh(an);
      n[b * H + i] = ni;
      const double hp = h_prev != nullptr ? h_prev[b * ldh + i] : 0.0;
      const double zi = z[b * H + i];
      h_out[b * ldo + i] = (1.0 - zi) * hp + zi * ni;
    }
  }
}

void Engine::step_forward(int layer, int dir, int t, int t_prev) {
  const std::size_t B = batch_, H = topo_.hidden, Hd = topo_.feature_width();
  double* h_out = hid_[layer].data() + t * B * Hd + dir * H;
  const double* h_prev = t_prev < 0 ? nullptr : hid_[layer].data() + t_prev * B * Hd + dir * H;
  Gates& g = gates_[layer][dir];
  gru_step_forward(model_.layer(layer, dir), B, layer_input(layer, t), layer_input_ld(layer), h_prev,
                   Hd, h_out, Hd, g.z.data() + t * B * H, g.r.data() + t * B * H,
                   g.n.data() + t * B * H, g.rh.data() + t * B * H, a_.data(), topo_.cell);
}

void Engine::forward(const double* x_raw, double keep, std::uint64_t* rng) {
  const std::size_t T = topo_.window, B = batch_, nj = topo_.n_joints, Hd = topo_.feature_width();
  const Normalizer& norm = model_.normalizer();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t idx = (t * B + b) * nj + j;
        x_[idx] = (x_raw[idx] - norm.in_mean[j]) / norm.in_scale[j];
      }

  dropout_ = keep < 1.0;
  if (dropout_) require(rng != nullptr, "invalid_argument", "dropout requires an rng state");

  for (int l = 0; l < topo_.layers; ++l) {
    std::fill(hid_[l].begin(), hid_[l].end(), 0.0);
    for (int d = 0; d < topo_.directions(); ++d) {
      const auto [first, last] = span(l, d);
      const int step = first <= last ? 1 : -1;
      for (int t = first;; t += step) {
        step_forward(l, d, t, t == first ? -1 : t - step);
        if (t == last) break;
      }
    }
    if (dropout_) {
      mask_[l].resize(hid_[l].size());
      act_[l].resize(hid_[l].size());
      const double scale = 1.0 / keep;
      for (std::size_t i = 0; i < hid_[l].size(); ++i) {
        mask_[l][i] = next_uniform(*rng) < keep ? scale : 0.0;
        act_[l][i] = hid_[l][i] * mask_[l][i];
      }
    }
  }

  const auto& k = simd::kernels();
  const double* feat = features();
  const double* wo = model_.readout_w();
  const double* bo = model_.readout_b();
  for (std::size_t b = 0; b < B; ++b) std::copy(bo, bo + nj, pred_.data() + b * nj);
  k.gemm_nt(B, nj, Hd, feat, Hd, wo, Hd, pred_.data(), nj, true);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < nj; ++j) {
      double& p = pred_[b * nj + j];
      p = norm.out_mean[j] + norm.out_scale[j] * p;
      if (topo_.input_skip) p += x_raw[(topo_.read_position() * B + b) * nj + j];
    }
}

void Engine::step_backward(int layer, int dir, int t, int t_prev, double* dh, double* grad_params,
                           std::vector<double>& d_in) {
  const auto& k = simd::kernels();
  const std::size_t B = batch_, H = topo_.hidden, Hd = topo_.feature_width(), G = 3 * H;
  const std::size_t in = topo_.layer_input(layer);
  const auto view = model_.layer(layer, dir);
  const double* x = layer_input(layer, t);
  const std::size_t ldx = layer_input_ld(layer);
  const double* h_prev = t_prev < 0 ? nullptr : hid_[layer].data() + t_prev * B * Hd + dir * H;
  const Gates& g = gates_[layer][dir];
  const double* z = g.z.data() + t * B * H;
  const double* r = g.r.data() + t * B * H;
  const double* n = g.n.data() + t * B * H;
  const double* rh = g.rh.data() + t * B * H;
  const bool linear = topo_.cell == CellKind::kLinearSurrogate;

  std::vector<double>& da = a_;  // reused as dA, B × 3H
  std::vector<double>& dz = dz_;
  std::vector<double>& dhp = dhp_;
  std::vector<double>& drh = drh_;
  std::fill(drh.begin(), drh.end(), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i) {
      const std::size_t e = b * H + i;
      const double hp = h_prev != nullptr ? h_prev[b * Hd + i] : 0.0;
      const double dhe = dh[e];
      if (linear) {
        dz[e] = 0.0;
        dhp[e] = 0.0;
        da[b * G + 2 * H + i] = dhe;
      } else {
        dz[e] = dhe * (n[e] - hp);
        dhp[e] = dhe * (1.0 - z[e]);
        da[b * G + 2 * H + i] = dhe * z[e] * (1.0 - n[e] * n[e]);
      }
    }
  if (h_prev != nullptr) k.gemm_nn(B, H, H, da.data() + 2 * H, G, view.u + 2 * H * H, H, drh.data(), H);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i) {
      const std::size_t e = b * H + i;
      const double hp = h_prev != nullptr ? h_prev[b * Hd + i] : 0.0;
      if (linear) {
        da[b * G + i] = 0.0;
        da[b * G + H + i] = 0.0;
        dhp[e] += drh[e];
      } else {
        const double dr = drh[e] * hp;
        dhp[e] += drh[e] * r[e];
        da[b * G + i] = dz[e] * z[e] * (1.0 - z[e]);
        da[b * G + H + i] = dr * r[e] * (1.0 - r[e]);
      }
    }

  if (grad_params != nullptr) {
    double* gw = grad_params + model_.layer_offset(layer, dir);
    double* gu = gw + G * in;
    double* gb = gu + G * H;
    k.gemm_tn(G, in, B, da.data(), G, x, ldx, gw, in);
    if (h_prev != nullptr) {
      k.gemm_tn(2 * H, H, B, da.data(), G, h_prev, Hd, gu, H);
      k.gemm_tn(H, H, B, da.data() + 2 * H, G, rh, H, gu + 2 * H * H, H);
    }
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < G; ++i) gb[i] += da[b * G + i];
  }

  k.gemm_nn(B, in, G, da.data(), G, view.w, in, d_in.data() + t * B * in, in);
  if (h_prev != nullptr && !linear) k.gemm_nn(B, H, 2 * H, da.data(), G, view.u, H, dhp.data(), H);
  std::copy(dhp.begin(), dhp.end(), dh);
}

void Engine::backward(const double* d_pred, double* grad_params, double* grad_input) {
  const auto& k = simd::kernels();
  const std::size_t T = topo_.window, B = batch_, nj = topo_.n_joints, H = topo_.hidden;
  const std::size_t Hd = topo_.feature_width();
  const Normalizer& norm = model_.normalizer();
  const int top = topo_.layers - 1;
  const int c = topo_.read_position();

  std::vector<double> d_raw(B * nj);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < nj; ++j) d_raw[b * nj + j] = d_pred[b * nj + j] * norm.out_scale[j];

  if (topo_.input_skip && grad_input != nullptr)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < nj; ++j) grad_input[(c * B + b) * nj + j] += d_pred[b * nj + j];

  if (grad_params != nullptr) {
    double* gwo = grad_params + model_.readout_offset();
    double* gbo = gwo + nj * Hd;
    k.gemm_tn(nj, Hd, B, d_raw.data(), nj, features(), Hd, gwo, Hd);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < nj; ++j) gbo[j] += d_raw[b * nj + j];
  }

  // Gradient w.r.t. the raw hidden outputs of the current layer.
  std::vector<double> d_out(T * B * Hd, 0.0);
  k.gemm_nn(B, Hd, nj, d_raw.data(), nj, model_.readout_w(), Hd, d_out.data() + c * B * Hd, Hd);
  if (dropout_) {
    const double* m = mask_[top].data() + c * B * Hd;
    for (std::size_t i = 0; i < B * Hd; ++i) d_out[c * B * Hd + i] *= m[i];
  }

  std::vector<double> dh(B * H);
  for (int l = top; l >= 0; --l) {
    const std::size_t in = topo_.layer_input(l);
    std::vector<double> d_in(T * B * in, 0.0);
    for (int d = 0; d < topo_.directions(); ++d) {
      const auto [first, last] = span(l, d);
      const int step = first <= last ? 1 : -1;
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int t = last;; t -= step) {
        const double* src = d_out.data() + t * B * Hd + d * H;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t i = 0; i < H; ++i) dh[b * H + i] += src[b * Hd + i];
        step_backward(l, d, t, t == first ? -1 : t - step, dh.data(), grad_params, d_in);
        if (t == first) break;
      }
    }
    if (l > 0) {
      if (dropout_) {
        const auto& m = mask_[l - 1];
        for (std::size_t i = 0; i < d_in.size(); ++i) d_in[i] *= m[i];
      }
      d_out = std::move(d_in);
    } else if (grad_input != nullptr) {
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t j = 0; j < nj; ++j) {
            const std::size_t idx = (t * B + b) * nj + j;
            grad_input[idx] += d_in[idx] / norm.in_scale[j];
          }
    }
  }
}

}  // namespace flexff::nn::detail
