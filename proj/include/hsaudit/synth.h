// include/hsaudit/synth.h

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

#ifndef HSAUDIT_SYNTH_H_
#define HSAUDIT_SYNTH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsaudit/core.h"

namespace hsaudit {

/*
  Linear-Gaussian hidden-state generator.  For speaker i, utterance u,
  frame t and layer l (1-based):

      h = alpha_l * s_i + beta * c_u + sigma * eps_t

  with s_i, c_u, eps_t ~ N(0, I_D).  The channel and frame noise are shared
  by all layers of an utterance, so the layer average is
  mean(alpha) * s_i + beta * c_u + sigma * eps_t.

  Random streams are keyed, not sequential:
    speaker vector   derive_seed(seed, "spk:" + speaker_id)
    utterance draws  derive_seed(seed, "utt:" + utterance_id)   (c_u, then eps row-major)
  with derive_seed(seed, key) = splitmix64(seed ^ splitmix64(fnv1a64(key))).
  Any utterance can therefore be regenerated on its own.

  Ids are "<prefix>NNNN" for speakers and "<speaker>-uNNN" for utterances;
  utterance u of a speaker gets turn index (u mod max_turns) + 1, so a
  speaker with utts_per_speaker = k * max_turns holds k complete dialogues.
*/
struct SynthConfig {
  int n_speakers = 64;
  int utts_per_speaker = 20;
  int frames_per_turn = 25;
  int dim = 32;
  int n_layers = 8;
  std::vector<double> speaker_scale = std::vector<double>(8, 0.5);  // alpha_l
  double channel_scale = 0.5;  // beta
  double noise_scale = 1.0;    // sigma
  std::uint64_t seed = 1;
  int max_turns = 10;
  double frame_rate_hz = 12.5;
  std::string speaker_prefix = "spk";
  std::vector<LayerKind> layers = {LayerKind::Early, LayerKind::Mid, LayerKind::Late,
                                   LayerKind::MeanPooledAll};
};

/// Throws ConfigError naming the offending field.
void validate_synth_config(const SynthConfig& cfg);

/// Speaker scale of a layer tag (the mean of all alphas for MeanPooledAll).
double layer_speaker_scale(const SynthConfig& cfg, const LayerTag& layer);

enum class PseudoPolicy { PerUtterance, PerSpeaker };

struct AnonConfig {
  double residual_leak = 0.0;  // rho: 0 removes identity, 1 passes it through
  PseudoPolicy pseudo_policy = PseudoPolicy::PerUtterance;
  AnonCondition mode = AnonCondition::W2F;
};

void validate_anon_config(const AnonConfig& a);

std::string pseudo_policy_name(PseudoPolicy p);
PseudoPolicy parse_pseudo_policy(const std::string& name);

Vector speaker_vector(const SynthConfig& cfg, const std::string& speaker_id);

/// All N per-layer frame sequences of one utterance.
std::vector<FrameSequence> utterance_layers(const SynthConfig& cfg, const std::string& speaker_id,
                                            const std::string& utterance_id);

/// Records for every configured layer, layer-major, then speaker, then
/// utterance.  Provenance Synthetic, anon_condition None.
Dataset gen_population(const SynthConfig& cfg, Split split = Split::Trial);

/// Replaces the speaker component of every frame:
///   h' = h + alpha_l ((rho - 1) s + sqrt(1 - rho^2) p)
/// with pseudo-speaker p ~ N(0, I) keyed per utterance or per speaker.  W2F
/// stops there; W2W also rotates every frame by a fixed random orthogonal
/// matrix (re-synthesis followed by re-encoding).  cfg must be the config
/// that generated d; only synthetic, not yet anonymized data is accepted.
Dataset apply_anon(const Dataset& d, const SynthConfig& cfg, const AnonConfig& a,
                   std::uint64_t seed);

/// The re-encoding rotation used by apply_anon for W2W.
Matrix reencode_rotation(int dim, std::uint64_t seed);

/// Per-dimension variances of a pooled observation under the exact model:
/// the shared speaker part and the per-observation part.
struct PooledVariance {
  double between = 0.0;
  double within = 0.0;
};

/// `utts_per_side` utterances (frames_per_turn frames each) are averaged
/// into one observation.
PooledVariance pooled_variance(const SynthConfig& cfg, const std::optional<AnonConfig>& anon,
                               const LayerTag& layer, int utts_per_side = 1);

/// Monte-Carlo trials from the exact model scored with the true
/// log-likelihood ratio on pooled means: n_trials / 2 mated and
/// n_trials - n_trials / 2 non-mated.
ScoreSet bayes_oracle_scores(const SynthConfig& cfg, const std::optional<AnonConfig>& anon,
                             const LayerTag& layer, int n_trials, std::uint64_t seed,
                             int utts_per_side = 1);

/// EER of bayes_oracle_scores: the lowest EER any attacker on mean-pooled
/// observations can reach, up to Monte-Carlo error.
double bayes_eer_oracle(const SynthConfig& cfg, const std::optional<AnonConfig>& anon,
                        const LayerTag& layer, int n_trials, std::uint64_t seed,
                        int utts_per_side = 1);

/// Named alpha/beta/sigma presets: "default", "moshi-flat", "salm-discrete",
/// "salm-decreasing".  Throws ConfigError for an unknown name.
SynthConfig synth_preset(const std::string& name);
std::vector<std::string> synth_preset_names();

}  // namespace hsaudit

#endif  // HSAUDIT_SYNTH_H_
