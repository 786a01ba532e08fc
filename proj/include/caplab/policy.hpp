#pragma once

#include <string>
#include <vector>

#include "caplab/corpus.hpp"
#include "caplab/linalg.hpp"
#include "caplab/rng.hpp"

namespace caplab {

// Autoregressive softmax sequence policy. The state at position t is the
// sample's feature vector concatenated with a one-hot of the previous token
// (the reserved begin-of-sequence token at t = 0), so logits = W * state + b
// decompose into a feature part and one looked-up one-hot column.
struct PolicyModel {
    int vocab_size = 0;
    int feature_dim = 0;
    int caption_length = 0;
    int bos_token = kBosToken;
    Mat w;  // [vocab_size x (feature_dim + vocab_size)]
    Vec b;  // [vocab_size]

    int state_dim() const { return feature_dim + vocab_size; }

    static PolicyModel zeros(int vocab_size, int feature_dim, int caption_length,
                             int bos_token = kBosToken);
    static PolicyModel for_dataset(const DatasetHeader& header);

    bool operator==(const PolicyModel&) const = default;
};

struct PolicyGrad {
    Mat w;
    Vec b;

    static PolicyGrad zeros_like(const PolicyModel& model);
    double squared_norm() const;
    double norm() const;
    void accumulate(const PolicyGrad& other, double coeff);
    void scale(double coeff);
};

struct Rollout {
    TokenSeq tokens;
    // Per-token log-probabilities under the policy that generated the rollout.
    Vec logprobs_old;
};

struct LogprobResult {
    double total = 0.0;
    Vec per_token;
};

// Logits over the vocabulary for one position.
Vec token_logits(const PolicyModel& model, const Vec& features, int prev_token);

// Normalized log-probabilities (logits minus logsumexp).
Vec token_logprobs(const PolicyModel& model, const Vec& features, int prev_token);

// Teacher-forced log-probability of a full token sequence.
LogprobResult logprob(const PolicyModel& model, const Vec& features, const TokenSeq& tokens);

// G autoregressive samples with recorded per-token log-probs.
std::vector<Rollout> sample_group(const PolicyModel& model, const Vec& features, int group_size,
                                  Rng& rng);

// Argmax decode, caption_length tokens; ties resolve to the lowest token id.
TokenSeq greedy_decode(const PolicyModel& model, const Vec& features);

// Gradient of the negative log-likelihood of one sequence (descent direction
// for sgd_step as-is).
PolicyGrad grad_nll(const PolicyModel& model, const Vec& features, const TokenSeq& ground_truth);

// Group-and-length-averaged clipped surrogate, to be maximized. Per token,
// ratio = exp(logprob_new - logprob_old) and the contribution is
// min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv).
double grpo_surrogate(const PolicyModel& model, const Vec& features,
                      const std::vector<Rollout>& rollouts, const Vec& advantages, double eps);

// Gradient of grpo_surrogate in the ascent direction; the caller negates it
// for descent. Flows only through tokens whose ratio is unclipped; exact zero
// when every advantage is zero.
PolicyGrad grad_grpo(const PolicyModel& model, const Vec& features,
                     const std::vector<Rollout>& rollouts, const Vec& advantages, double eps);

// theta <- theta - lr * grad, followed by a finiteness check that names the
// offending parameter block on failure.
void sgd_step(PolicyModel& model, const PolicyGrad& grad, double lr);

struct Checkpoint {
    PolicyModel model;
    std::string corpus_hash;
};

void save_checkpoint(const PolicyModel& model, const std::string& corpus_hash,
                     const std::string& path);
// extra_json must serialize a JSON object; its fields are merged into the
// checkpoint's top level (run provenance such as the training config).
void save_checkpoint(const PolicyModel& model, const std::string& corpus_hash,
                     const std::string& path, const std::string& extra_json);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace caplab
