#include <limits>
#include "uat/task_models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "uat/error.hpp"
#include "uat/text.hpp"

namespace uat {

const char* to_string(NliLabel l) {
    switch (l) {
        case NliLabel::ENTAILMENT: return "ENTAILMENT";
        case NliLabel::CONTRADICTION: return "CONTRADICTION";
        case NliLabel::NEUTRAL: return "NEUTRAL";
    }
    throw ValidationError("invalid NLI label");
}

Label nli_to_fc(NliLabel l) {
    return static_cast<Label>(static_cast<int>(l));
}

NliLabel fc_to_nli(Label l) {
    return static_cast<NliLabel>(static_cast<int>(l));
}

FactCheckModel make_fc_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                             std::uint64_t seed) {
    return {make_model(std::move(v), OwnerTag::FC, TaskKind::classifier, Activation::tanh_act,
                       embed_dim, hidden_dim, 3, 48, seed)};
}

StsModel make_sts_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                        std::uint64_t seed) {
    return {make_model(std::move(v), OwnerTag::STS, TaskKind::pair_score, Activation::tanh_act,
                       embed_dim, hidden_dim, 1, 48, seed)};
}

NliModel make_nli_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                        std::uint64_t seed) {
    return {make_model(std::move(v), OwnerTag::NLI, TaskKind::classifier, Activation::tanh_act,
                       embed_dim, hidden_dim, 3, 48, seed)};
}

ConditionalLm make_lm_model(std::shared_ptr<const Vocabulary> v, int embed_dim, int hidden_dim,
                            int context_window, std::uint64_t seed) {
    const int out = v->size();
    return {make_model(std::move(v), OwnerTag::LM, TaskKind::next_token, Activation::tanh_act,
                       embed_dim, hidden_dim, out, context_window, seed)};
}

std::vector<int> pack_pair(const Vocabulary& v, std::string_view claim, std::string_view evidence) {
    std::vector<int> ids = v.encode(claim);
    ids.push_back(v.sep_id);
    const auto ev = v.encode(evidence);
    ids.insert(ids.end(), ev.begin(), ev.end());
    return ids;
}

namespace {

int argmax_lowest(const Eigen::VectorXd& z) {
    int best = 0;
    for (int i = 1; i < z.size(); ++i)
        if (z(i) > z(best)) best = i;
    return best;
}

Eigen::VectorXd class_logits(const EncoderModel& m, const std::vector<int>& ids) {
    const Eigen::VectorXd h = encode_hidden(m, ids);
    return m.W2 * h + m.b2;
}

Eigen::VectorXd softmax_vec(const Eigen::VectorXd& z) {
    const double zmax = z.maxCoeff();
    Eigen::VectorXd p(z.size());
    double s = 0.0;
    for (int j = 0; j < z.size(); ++j) {
        p(j) = std::exp(z(j) - zmax);
        s += p(j);
    }
    return p / s;
}

} // namespace

std::pair<Label, std::array<double, 3>> fc_predict(const FactCheckModel& fc,
                                                   std::string_view claim,
                                                   std::string_view evidence) {
    const auto ids = pack_pair(*fc.m.vocab, claim, evidence);
    const Eigen::VectorXd z = class_logits(fc.m, ids);
    const Eigen::VectorXd p = softmax_vec(z);
    return {static_cast<Label>(argmax_lowest(p)), {p(0), p(1), p(2)}};
}

double sts_score(const StsModel& sts, std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) throw ValidationError("sts_score requires non-empty texts");
    const auto ia = sts.m.vocab->encode(a);
    const auto ib = sts.m.vocab->encode(b);
    if (ia == ib) return 5.0; // reflexive maximality by construction
    const Eigen::VectorXd ha = encode_hidden(sts.m, ia);
    const Eigen::VectorXd hb = encode_hidden(sts.m, ib);
    const double na = ha.norm(), nb = hb.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = std::clamp(ha.dot(hb) / (na * nb), -1.0, 1.0);
    return 5.0 * std::max(0.0, c);
}

double sts_loss(const StsModel& sts, std::string_view original, std::string_view triggered) {
    const double s = sts_score(sts, original, triggered);
    const double d = 5.0 - s;
    return d * d / 25.0;
}

NliLabel nli_label(const NliModel& nli, std::string_view evidence, std::string_view claim) {
    const auto ids = pack_pair(*nli.m.vocab, claim, evidence);
    const Eigen::VectorXd z = class_logits(nli.m, ids);
    return static_cast<NliLabel>(argmax_lowest(z));
}

double lm_perplexity(const ConditionalLm& lm, std::string_view text) {
    const auto ids = lm.m.vocab->encode(text);
    if (ids.empty()) throw ValidationError("lm_perplexity requires at least one token");
    const double mean_nll = instance_loss(lm.m, SeqExample{ids});
    return std::exp(mean_nll);
}

std::vector<int> lm_generate_stream(const ConditionalLm& lm, const std::vector<int>& prefix,
                                    int max_length, double temperature, Rng& rng) {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (max_length < 0) throw ConfigError("max_length must be >= 0");
    if (static_cast<int>(prefix.size()) > lm.m.context_window)
        throw GenerationError("prefix does not fit the context window");
    for (int t : prefix)
        if (t < 0 || t >= lm.m.vocab->size()) throw IndexError("prefix token id out of range");

    std::vector<int> seq = prefix;
    std::vector<int> out;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(lm.m.embed_dim);
    for (int t : seq) sum += lm.m.E.row(t).transpose();
    while (static_cast<int>(out.size()) < max_length &&
           static_cast<int>(seq.size()) < lm.m.context_window) {
        Eigen::VectorXd ctx;
        if (seq.empty())
            ctx = Eigen::VectorXd::Zero(lm.m.embed_dim);
        else
            ctx = sum / double(seq.size());
        const Eigen::VectorXd h = apply_activation(lm.m, lm.m.W1 * ctx + lm.m.b1);
        Eigen::VectorXd z = lm.m.W2 * h + lm.m.b2;
        z /= temperature;
        // Structural ids exist for conditioning only; EOS stays samplable
        // so sequences can terminate.
        for (int sid = 0; sid < Vocabulary::n_special; ++sid)
            if (sid != lm.m.vocab->eos_id) z(sid) = -std::numeric_limits<double>::infinity();
        const Eigen::VectorXd p = softmax_vec(z);
        const double u = rng.unit();
        int pick = static_cast<int>(p.size()) - 1;
        double acc = 0.0;
        for (int j = 0; j < p.size(); ++j) {
            acc += p(j);
            if (u < acc) {
                pick = j;
                break;
            }
        }
        if (pick == lm.m.vocab->eos_id) break;
        out.push_back(pick);
        seq.push_back(pick);
        sum += lm.m.E.row(pick).transpose();
    }
    return out;
}

std::vector<int> lm_generate(const ConditionalLm& lm, const std::vector<int>& prefix,
                             const SamplingParams& params) {
    Rng rng(params.seed);
    return lm_generate_stream(lm, prefix, params.max_length, params.temperature, rng);
}

std::vector<Example> fc_examples(const Vocabulary& v, const Dataset& d) {
    std::vector<Example> out;
    out.reserve(d.instances.size());
    for (const auto& inst : d.instances)
        out.push_back(ClsExample{pack_pair(v, inst.claim, inst.evidence),
                                 static_cast<int>(inst.label)});
    return out;
}

std::vector<Example> nli_examples(const Vocabulary& v, const Dataset& d) {
    std::vector<Example> out;
    out.reserve(d.instances.size());
    for (const auto& inst : d.instances)
        out.push_back(ClsExample{pack_pair(v, inst.claim, inst.evidence),
                                 static_cast<int>(fc_to_nli(inst.label))});
    return out;
}

namespace {

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
    const std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (int x : sa)
        if (sb.count(x)) ++inter;
    const std::size_t uni = sa.size() + sb.size() - inter;
    if (uni == 0) return 0.0;
    return double(inter) / double(uni);
}

} // namespace

std::vector<Example> sts_examples(const Vocabulary& v, const Dataset& d, std::uint64_t seed) {
    if (d.instances.empty()) return {};
    Rng rng(derive_seed(seed, "sts.pairs"));
    std::vector<Example> out;
    out.reserve(3 * d.instances.size());
    const int vsize = v.size();
    for (std::size_t i = 0; i < d.instances.size(); ++i) {
        const auto ids = v.encode(d.instances[i].claim);
        out.push_back(PairExample{ids, ids, 5.0});
        const std::size_t j = rng.index(d.instances.size());
        const auto other = v.encode(d.instances[j].claim);
        out.push_back(PairExample{ids, other, 5.0 * jaccard(ids, other)});
        int tok;
        do {
            tok = static_cast<int>(rng.index(vsize));
        } while (v.is_special(tok));
        std::vector<int> prep;
        prep.reserve(ids.size() + 1);
        prep.push_back(tok);
        prep.insert(prep.end(), ids.begin(), ids.end());
        out.push_back(PairExample{prep, ids, 5.0 * jaccard(prep, ids)});
    }
    return out;
}

std::vector<Example> lm_claim_examples(const Vocabulary& v, const Dataset& d) {
    std::vector<Example> out;
    out.reserve(d.instances.size());
    for (const auto& inst : d.instances) {
        auto ids = v.encode(inst.claim);
        ids.push_back(v.eos_id);
        out.push_back(SeqExample{std::move(ids)});
    }
    return out;
}

} // namespace uat
