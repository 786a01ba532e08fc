#include "caplab/policy.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

namespace caplab {

using nlohmann::json;

PolicyModel PolicyModel::zeros(int vocab_size, int feature_dim, int caption_length,
                               int bos_token) {
    if (vocab_size < 2) throw ValidationError("policy needs a vocabulary of at least 2 tokens");
    if (feature_dim <= 0) throw ValidationError("policy feature_dim must be positive");
    if (caption_length <= 0) throw ValidationError("policy caption_length must be positive");
    if (bos_token < 0 || bos_token >= vocab_size) {
        throw ValidationError("policy bos_token outside the vocabulary");
    }
    PolicyModel model;
    model.vocab_size = vocab_size;
    model.feature_dim = feature_dim;
    model.caption_length = caption_length;
    model.bos_token = bos_token;
    model.w = Mat(vocab_size, feature_dim + vocab_size);
    model.b.assign(static_cast<std::size_t>(vocab_size), 0.0);
    return model;
}

PolicyModel PolicyModel::for_dataset(const DatasetHeader& header) {
    return zeros(header.vocab_size(), header.feature_dim, header.caption_length);
}

PolicyGrad PolicyGrad::zeros_like(const PolicyModel& model) {
    PolicyGrad grad;
    grad.w = Mat(model.vocab_size, model.state_dim());
    grad.b.assign(static_cast<std::size_t>(model.vocab_size), 0.0);
    return grad;
}

double PolicyGrad::squared_norm() const {
    double total = squared_l2(w.a);
    total += squared_l2(b);
    return total;
}

double PolicyGrad::norm() const { return std::sqrt(squared_norm()); }

void PolicyGrad::accumulate(const PolicyGrad& other, double coeff) {
    if (w.a.size() != other.w.a.size() || b.size() != other.b.size()) {
        throw InternalError("gradient shape mismatch in accumulate");
    }
    for (std::size_t i = 0; i < w.a.size(); ++i) w.a[i] += coeff * other.w.a[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += coeff * other.b[i];
}

void PolicyGrad::scale(double coeff) {
    for (auto& x : w.a) x *= coeff;
    for (auto& x : b) x *= coeff;
}

namespace {

void check_features(const PolicyModel& model, const Vec& features) {
    if (static_cast<int>(features.size()) != model.feature_dim) {
        throw ValidationError("feature vector has dimension " +
                              std::to_string(features.size()) + ", policy expects " +
                              std::to_string(model.feature_dim));
    }
}

void check_token(const PolicyModel& model, int token) {
    if (token < 0 || token >= model.vocab_size) {
        throw ValidationError("token " + std::to_string(token) + " outside the vocabulary");
    }
}

Vec softmax_from_logits(const Vec& logits) {
    Vec probs(logits.size());
    const double lse = logsumexp(logits);
    for (std::size_t v = 0; v < logits.size(); ++v) probs[v] = std::exp(logits[v] - lse);
    return probs;
}

}  // namespace

Vec token_logits(const PolicyModel& model, const Vec& features, int prev_token) {
    check_features(model, features);
    check_token(model, prev_token);
    Vec logits(static_cast<std::size_t>(model.vocab_size));
    const std::size_t prev_col = static_cast<std::size_t>(model.feature_dim + prev_token);
    for (int v = 0; v < model.vocab_size; ++v) {
        const auto row = model.w.row(v);
        double z = model.b[static_cast<std::size_t>(v)] + row[prev_col];
        for (int m = 0; m < model.feature_dim; ++m) {
            z += row[static_cast<std::size_t>(m)] * features[static_cast<std::size_t>(m)];
        }
        logits[static_cast<std::size_t>(v)] = z;
    }
    return logits;
}

Vec token_logprobs(const PolicyModel& model, const Vec& features, int prev_token) {
    Vec logits = token_logits(model, features, prev_token);
    const double lse = logsumexp(logits);
    for (auto& z : logits) z -= lse;
    return logits;
}

LogprobResult logprob(const PolicyModel& model, const Vec& features, const TokenSeq& tokens) {
    LogprobResult result;
    result.per_token.reserve(tokens.size());
    int prev = model.bos_token;
    for (int token : tokens) {
        check_token(model, token);
        const Vec lp = token_logprobs(model, features, prev);
        const double value = lp[static_cast<std::size_t>(token)];
        result.per_token.push_back(value);
        result.total += value;
        prev = token;
    }
    return result;
}

std::vector<Rollout> sample_group(const PolicyModel& model, const Vec& features, int group_size,
                                  Rng& rng) {
    if (group_size < 1) throw ValidationError("group_size must be at least 1");
    std::vector<Rollout> rollouts(static_cast<std::size_t>(group_size));
    for (auto& rollout : rollouts) {
        rollout.tokens.reserve(static_cast<std::size_t>(model.caption_length));
        rollout.logprobs_old.reserve(static_cast<std::size_t>(model.caption_length));
        int prev = model.bos_token;
        for (int t = 0; t < model.caption_length; ++t) {
            const Vec lp = token_logprobs(model, features, prev);
            const double u = rng.uniform01();
            double cdf = 0.0;
            int chosen = model.vocab_size - 1;
            for (int v = 0; v < model.vocab_size; ++v) {
                cdf += std::exp(lp[static_cast<std::size_t>(v)]);
                if (u < cdf) {
                    chosen = v;
                    break;
                }
            }
            rollout.tokens.push_back(chosen);
            rollout.logprobs_old.push_back(lp[static_cast<std::size_t>(chosen)]);
            prev = chosen;
        }
    }
    return rollouts;
}

TokenSeq greedy_decode(const PolicyModel& model, const Vec& features) {
    TokenSeq tokens;
    tokens.reserve(static_cast<std::size_t>(model.caption_length));
    int prev = model.bos_token;
    for (int t = 0; t < model.caption_length; ++t) {
        const Vec logits = token_logits(model, features, prev);
        int best = 0;
        for (int v = 1; v < model.vocab_size; ++v) {
            if (logits[static_cast<std::size_t>(v)] > logits[static_cast<std::size_t>(best)]) {
                best = v;
            }
        }
        tokens.push_back(best);
        prev = best;
    }
    return tokens;
}

namespace {

// Adds coeff * (probs - onehot(token)) outer state to the gradient, where the
// state is features concatenated with onehot(prev_token).
void accumulate_logit_grad(PolicyGrad& grad, const PolicyModel& model, const Vec& features,
                           int prev_token, const Vec& probs, int token, double coeff) {
    const std::size_t prev_col = static_cast<std::size_t>(model.feature_dim + prev_token);
    for (int v = 0; v < model.vocab_size; ++v) {
        double g = probs[static_cast<std::size_t>(v)];
        if (v == token) g -= 1.0;
        g *= coeff;
        if (g == 0.0) continue;
        auto row = grad.w.row(v);
        for (int m = 0; m < model.feature_dim; ++m) {
            row[static_cast<std::size_t>(m)] += g * features[static_cast<std::size_t>(m)];
        }
        row[prev_col] += g;
        grad.b[static_cast<std::size_t>(v)] += g;
    }
}

}  // namespace

PolicyGrad grad_nll(const PolicyModel& model, const Vec& features, const TokenSeq& ground_truth) {
    PolicyGrad grad = PolicyGrad::zeros_like(model);
    int prev = model.bos_token;
    for (int token : ground_truth) {
        check_token(model, token);
        const Vec probs = softmax_from_logits(token_logits(model, features, prev));
        accumulate_logit_grad(grad, model, features, prev, probs, token, 1.0);
        prev = token;
    }
    return grad;
}

namespace {

void check_group(const std::vector<Rollout>& rollouts, const Vec& advantages) {
    if (rollouts.size() != advantages.size()) {
        throw ValidationError("rollout count does not match advantage count");
    }
    if (rollouts.empty()) throw ValidationError("empty rollout group");
    for (const auto& rollout : rollouts) {
        if (rollout.tokens.empty() || rollout.tokens.size() != rollout.logprobs_old.size()) {
            throw ValidationError("rollout tokens and stored log-probs are misaligned");
        }
    }
}

}  // namespace

double grpo_surrogate(const PolicyModel& model, const Vec& features,
                      const std::vector<Rollout>& rollouts, const Vec& advantages, double eps) {
    check_group(rollouts, advantages);
    if (eps <= 0.0) throw ValidationError("eps must be positive");
    double total = 0.0;
    for (std::size_t j = 0; j < rollouts.size(); ++j) {
        const Rollout& rollout = rollouts[j];
        const double adv = advantages[j];
        const LogprobResult lp = logprob(model, features, rollout.tokens);
        double seq_term = 0.0;
        for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
            const double ratio = std::exp(lp.per_token[t] - rollout.logprobs_old[t]);
            const double clipped = std::min(std::max(ratio, 1.0 - eps), 1.0 + eps);
            seq_term += std::min(ratio * adv, clipped * adv);
        }
        total += seq_term / static_cast<double>(rollout.tokens.size());
    }
    return total / static_cast<double>(rollouts.size());
}

PolicyGrad grad_grpo(const PolicyModel& model, const Vec& features,
                     const std::vector<Rollout>& rollouts, const Vec& advantages, double eps) {
    check_group(rollouts, advantages);
    if (eps <= 0.0) throw ValidationError("eps must be positive");
    PolicyGrad grad = PolicyGrad::zeros_like(model);
    const double group_scale = 1.0 / static_cast<double>(rollouts.size());
    for (std::size_t j = 0; j < rollouts.size(); ++j) {
        const Rollout& rollout = rollouts[j];
        const double adv = advantages[j];
        if (adv == 0.0) continue;
        const double length_scale = group_scale / static_cast<double>(rollout.tokens.size());
        int prev = model.bos_token;
        for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
            const int token = rollout.tokens[t];
            check_token(model, token);
            const Vec probs = softmax_from_logits(token_logits(model, features, prev));
            const double lp_new = std::log(probs[static_cast<std::size_t>(token)]);
            const double ratio = std::exp(lp_new - rollout.logprobs_old[t]);
            // The min with the clipped term keeps the gradient only while the
            // unclipped branch is active (including exactly at the boundary).
            const bool flows = adv > 0.0 ? ratio <= 1.0 + eps : ratio >= 1.0 - eps;
            if (!flows) {
                prev = token;
                continue;
            }
            // Ascent on adv * ratio: d/dlogits = adv * ratio * (onehot - probs),
            // folded into the (probs - onehot) accumulator with a negated
            // coefficient.
            accumulate_logit_grad(grad, model, features, prev, probs, token,
                                  -adv * ratio * length_scale);
            prev = token;
        }
    }
    return grad;
}

void sgd_step(PolicyModel& model, const PolicyGrad& grad, double lr) {
    if (lr < 0.0) throw ValidationError("learning rate must be nonnegative");
    if (grad.w.a.size() != model.w.a.size() || grad.b.size() != model.b.size()) {
        throw InternalError("gradient shape does not match model parameters");
    }
    for (std::size_t i = 0; i < model.w.a.size(); ++i) model.w.a[i] -= lr * grad.w.a[i];
    for (std::size_t i = 0; i < model.b.size(); ++i) model.b[i] -= lr * grad.b[i];
    for (double x : model.w.a) {
        if (!std::isfinite(x)) throw InternalError("non-finite value in parameter block W");
    }
    for (double x : model.b) {
        if (!std::isfinite(x)) throw InternalError("non-finite value in parameter block b");
    }
}

void save_checkpoint(const PolicyModel& model, const std::string& corpus_hash,
                     const std::string& path) {
    save_checkpoint(model, corpus_hash, path, "");
}

void save_checkpoint(const PolicyModel& model, const std::string& corpus_hash,
                     const std::string& path, const std::string& extra_json) {
    json obj{{"schema_version", 1},
             {"vocab_size", model.vocab_size},
             {"feature_dim", model.feature_dim},
             {"caption_length", model.caption_length},
             {"bos_token", model.bos_token},
             {"corpus_hash", corpus_hash},
             {"w", model.w.a},
             {"b", model.b}};
    if (!extra_json.empty()) {
        json extra;
        try {
            extra = json::parse(extra_json);
        } catch (const json::parse_error&) {
            throw ValidationError("extra_json must be a JSON object");
        }
        if (!extra.is_object()) throw ValidationError("extra_json must be a JSON object");
        obj.update(extra);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open \"" + path + "\" for writing");
    const std::string body = obj.dump();
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.put('\n');
    if (!out) throw DataError("write failed for \"" + path + "\"");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\" for reading");
    json obj;
    try {
        obj = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path + ": invalid checkpoint JSON: " + e.what());
    }
    try {
        if (obj.at("schema_version").get<int>() != 1) {
            throw DataError("unsupported checkpoint schema_version");
        }
        Checkpoint ckpt;
        ckpt.corpus_hash = obj.at("corpus_hash").get<std::string>();
        ckpt.model = PolicyModel::zeros(obj.at("vocab_size").get<int>(),
                                        obj.at("feature_dim").get<int>(),
                                        obj.at("caption_length").get<int>(),
                                        obj.at("bos_token").get<int>());
        const auto w = obj.at("w").get<std::vector<double>>();
        const auto b = obj.at("b").get<std::vector<double>>();
        if (w.size() != ckpt.model.w.a.size() || b.size() != ckpt.model.b.size()) {
            throw DataError("checkpoint parameter arrays do not match the declared shapes");
        }
        ckpt.model.w.a = w;
        ckpt.model.b = b;
        return ckpt;
    } catch (const json::exception& e) {
        throw DataError(path + ": malformed checkpoint: " + e.what());
    }
}

}  // namespace caplab
