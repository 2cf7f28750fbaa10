// src/synth.cc

// Copyright 2026  The hsaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "hsaudit/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "hsaudit/metrics.h"
#include "hsaudit/rng.h"

namespace hsaudit {

namespace {

std::string padded(int v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*d", width, v);
  return buf;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  require(cfg.n_speakers >= 1, "synth.n_speakers must be >= 1");
  require(cfg.utts_per_speaker >= 1, "synth.utts_per_speaker must be >= 1");
  require(cfg.frames_per_turn >= 1, "synth.frames_per_turn must be >= 1");
  require(cfg.dim >= 1, "synth.dim must be >= 1");
  require(cfg.n_layers >= 1 && cfg.n_layers <= 65535, "synth.n_layers must be in [1, 65535]");
  require(static_cast<int>(cfg.speaker_scale.size()) == cfg.n_layers,
          "synth.speaker_scale must have n_layers entries");
  for (double a : cfg.speaker_scale)
    require(std::isfinite(a) && a >= 0.0, "synth.speaker_scale entries must be finite and >= 0");
  require(std::isfinite(cfg.channel_scale) && cfg.channel_scale >= 0.0,
          "synth.channel_scale must be finite and >= 0");
  require(std::isfinite(cfg.noise_scale) && cfg.noise_scale > 0.0,
          "synth.noise_scale must be finite and > 0");
  require(cfg.max_turns >= 1, "synth.max_turns must be >= 1");
  require(std::isfinite(cfg.frame_rate_hz) && cfg.frame_rate_hz > 0.0,
          "synth.frame_rate_hz must be > 0");
  require(!cfg.layers.empty(), "synth.layers must not be empty");
}

void validate_anon_config(const AnonConfig& a) {
  require(a.residual_leak >= 0.0 && a.residual_leak <= 1.0, "anon.residual_leak must lie in [0, 1]");
  require(a.mode != AnonCondition::None, "anon.mode must be w2w or w2f");
}

std::string pseudo_policy_name(PseudoPolicy p) {
  return p == PseudoPolicy::PerUtterance ? "per-utterance" : "per-speaker";
}

PseudoPolicy parse_pseudo_policy(const std::string& name) {
  if (name == "per-utterance") return PseudoPolicy::PerUtterance;
  if (name == "per-speaker") return PseudoPolicy::PerSpeaker;
  throw ConfigError("unknown pseudo policy '" + name + "' (expected per-utterance|per-speaker)");
}

double layer_speaker_scale(const SynthConfig& cfg, const LayerTag& layer) {
  const auto& a = cfg.speaker_scale;
  if (layer.kind == LayerKind::MeanPooledAll)
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  if (layer.index < 1 || layer.index > static_cast<int>(a.size()))
    throw DataError("layer index " + std::to_string(layer.index) + " outside the synthetic model");
  return a[layer.index - 1];
}

Vector speaker_vector(const SynthConfig& cfg, const std::string& speaker_id) {
  Rng rng(derive_seed(cfg.seed, "spk:" + speaker_id));
  return rng.normal_vector(cfg.dim);
}

namespace {

// beta * c + sigma * eps, shared by every layer of the utterance.
Matrix utterance_base(const SynthConfig& cfg, const std::string& utterance_id) {
  Rng rng(derive_seed(cfg.seed, "utt:" + utterance_id));
  const Vector c = rng.normal_vector(cfg.dim);
  Matrix frames = cfg.noise_scale * rng.normal_matrix(cfg.frames_per_turn, cfg.dim);
  frames.rowwise() += cfg.channel_scale * c.transpose();
  return frames;
}

}  // namespace

std::vector<FrameSequence> utterance_layers(const SynthConfig& cfg, const std::string& speaker_id,
                                            const std::string& utterance_id) {
  validate_synth_config(cfg);
  const Vector s = speaker_vector(cfg, speaker_id);
  const Matrix base = utterance_base(cfg, utterance_id);
  std::vector<FrameSequence> out;
  for (double alpha : cfg.speaker_scale) {
    FrameSequence seq{base, cfg.frame_rate_hz};
    seq.frames.rowwise() += alpha * s.transpose();
    out.push_back(std::move(seq));
  }
  return out;
}

Dataset gen_population(const SynthConfig& cfg, Split split) {
  validate_synth_config(cfg);
  Dataset d{{}, split, Provenance::Synthetic, AnonCondition::None};

  struct Utt {
    std::string speaker, id;
    std::uint32_t turn;
    Matrix base;
  };
  std::vector<Utt> utts;
  std::vector<Vector> speakers;
  for (int i = 0; i < cfg.n_speakers; ++i) {
    const std::string spk = cfg.speaker_prefix + padded(i, 4);
    speakers.push_back(speaker_vector(cfg, spk));
    for (int u = 0; u < cfg.utts_per_speaker; ++u) {
      const std::string uid = spk + "-u" + padded(u, 3);
      utts.push_back({spk, uid, static_cast<std::uint32_t>(u % cfg.max_turns + 1),
                      utterance_base(cfg, uid)});
    }
  }

  d.records.reserve(utts.size() * cfg.layers.size());
  for (LayerKind kind : cfg.layers) {
    const LayerTag tag = LayerTag::of_kind(kind, cfg.n_layers);
    const double alpha = layer_speaker_scale(cfg, tag);
    for (std::size_t k = 0; k < utts.size(); ++k) {
      const auto& u = utts[k];
      UtteranceRecord r{u.id, u.speaker, u.turn, tag, {u.base, cfg.frame_rate_hz}};
      r.seq.frames.rowwise() += alpha * speakers[k / cfg.utts_per_speaker].transpose();
      d.records.push_back(std::move(r));
    }
  }
  return d;
}

Matrix reencode_rotation(int dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "reencode-rotation"));
  return random_orthogonal(dim, rng);
}

Dataset apply_anon(const Dataset& d, const SynthConfig& cfg, const AnonConfig& a,
                   std::uint64_t seed) {
  validate_synth_config(cfg);
  validate_anon_config(a);
  if (d.anon_condition != AnonCondition::None)
    throw DataError("dataset is already anonymized (" + anon_condition_name(d.anon_condition) + ")");
  if (d.provenance != Provenance::Synthetic)
    throw DataError("anonymization operators need the synthetic latent structure");

  const double rho = a.residual_leak;
  const double mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const Matrix rotation =
      a.mode == AnonCondition::W2W ? reencode_rotation(cfg.dim, seed) : Matrix();

  Dataset out{{}, d.split, d.provenance, a.mode};
  out.records.reserve(d.records.size());
  for (const auto& r : d.records) {
    if (r.seq.dim() != cfg.dim) throw DataError("record '" + r.utterance_id + "' dimension mismatch");
    const double alpha = layer_speaker_scale(cfg, r.layer);
    const Vector s = speaker_vector(cfg, r.speaker_id);
    const std::string key = a.pseudo_policy == PseudoPolicy::PerUtterance
                                ? "pseudo:utt:" + r.utterance_id
                                : "pseudo:spk:" + r.speaker_id;
    Rng rng(derive_seed(seed, key));
    const Vector p = rng.normal_vector(cfg.dim);
    const Vector shift = alpha * ((rho - 1.0) * s + mix * p);

    UtteranceRecord anon = r;
    anon.seq.frames.rowwise() += shift.transpose();
    if (a.mode == AnonCondition::W2W) anon.seq.frames = anon.seq.frames * rotation.transpose();
    out.records.push_back(std::move(anon));
  }
  return out;
}

PooledVariance pooled_variance(const SynthConfig& cfg, const std::optional<AnonConfig>& anon,
                               const LayerTag& layer, int utts_per_side) {
  if (utts_per_side < 1) throw ConfigError("utts_per_side must be >= 1");
  const double alpha = layer_speaker_scale(cfg, layer);
  const double a2 = alpha * alpha;
  const double n = utts_per_side;
  // Utterance-level noise shrinks with the number of pooled utterances,
  // frame-level noise with the number of pooled frames.
  double per_utt = cfg.channel_scale * cfg.channel_scale;
  double between = a2;
  if (anon && anon->pseudo_policy == PseudoPolicy::PerUtterance) {
    const double rho = anon->residual_leak;
    between = a2 * rho * rho;
    per_utt += a2 * (1.0 - rho * rho);
  }
  const double frame = cfg.noise_scale * cfg.noise_scale / cfg.frames_per_turn;
  return {between, (per_utt + frame) / n};
}

ScoreSet bayes_oracle_scores(const SynthConfig& cfg, const std::optional<AnonConfig>& anon,
                             const LayerTag& layer, int n_trials, std::uint64_t seed,
                             int utts_per_side) {
  if (n_trials < 2) throw ConfigError("n_trials must be >= 2");
  const PooledVariance v = pooled_variance(cfg, anon, layer, utts_per_side);
  const double b = v.between;
  const double w = v.within;
  const double sb = std::sqrt(b);
  const double sw = std::sqrt(w);
  const int d = cfg.dim;

  // Per-dimension LLR of a pair (x, y):
  //   log N([x y]; 0, [[b+w, b], [b, b+w]]) - log N(x; 0, b+w) - log N(y; 0, b+w)
  const double t = b + w;
  const double det = w * (w + 2.0 * b);
  auto llr = [&](const Vector& x, const Vector& y) {
    if (b == 0.0) return 0.0;
    if (w == 0.0) return -(x - y).squaredNorm();  // noiseless: equality decides
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      const double quad = (t * (x[k] * x[k] + y[k] * y[k]) - 2.0 * b * x[k] * y[k]) / det;
      s += -0.5 * std::log(det) - 0.5 * quad + std::log(t) + 0.5 * (x[k] * x[k] + y[k] * y[k]) / t;
    }
    return s;
  };

  Rng rng(derive_seed(seed, "bayes-oracle"));
  ScoreSet out;
  const int n_mated = n_trials / 2;
  for (int i = 0; i < n_trials; ++i) {
    const bool mated = i < n_mated;
    const Vector z1 = sb * rng.normal_vector(d);
    const Vector z2 = mated ? z1 : Vector(sb * rng.normal_vector(d));
    const Vector x = z1 + sw * rng.normal_vector(d);
    const Vector y = z2 + sw * rng.normal_vector(d);
    (mated ? out.mated : out.non_mated).push_back(llr(x, y));
  }
  return out;
}

double bayes_eer_oracle(const SynthConfig& cfg, const std::optional<AnonConfig>& anon,
                        const LayerTag& layer, int n_trials, std::uint64_t seed,
                        int utts_per_side) {
  // Interpolated rather than a min-max envelope: with no speaker signal all
  // scores tie and only the interpolated crossing gives 0.5.
  return compute_eer(bayes_oracle_scores(cfg, anon, layer, n_trials, seed, utts_per_side)).eer;
}

std::vector<std::string> synth_preset_names() {
  return {"default", "moshi-flat", "salm-discrete", "salm-decreasing"};
}

SynthConfig synth_preset(const std::string& name) {
  SynthConfig cfg;
  auto linear = [](int n, double first, double last) {
    std::vector<double> a(n);
    for (int l = 0; l < n; ++l) a[l] = first + (last - first) * l / std::max(1, n - 1);
    return a;
  };
  if (name == "default") return cfg;
  if (name == "moshi-flat") {
    // Nearly flat with a slight mid-stack peak.
    cfg.n_layers = 32;
    cfg.speaker_scale.resize(32);
    for (int l = 0; l < 32; ++l)
      cfg.speaker_scale[l] = 0.52 + 0.025 * std::sin(std::numbers::pi * l / 31.0);
    return cfg;
  }
  if (name == "salm-discrete") {
    cfg.n_layers = 20;
    cfg.speaker_scale = linear(20, 0.52, 0.36);
    return cfg;
  }
  if (name == "salm-decreasing") {
    cfg.n_layers = 20;
    cfg.speaker_scale = linear(20, 0.31, 0.25);
    return cfg;
  }
  throw ConfigError("unknown synth preset '" + name + "'");
}

}  // namespace hsaudit
