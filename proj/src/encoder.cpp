#include "uat/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"
#include "uat/rng.hpp"
#include "uat/text.hpp"

namespace uat {

using nlohmann::json;

// ---------------------------------------------------------------- vocabulary

const std::array<const char*, Vocabulary::n_special>& Vocabulary::special_tokens() {
    static const std::array<const char*, n_special> s = {"[PAD]", "[UNK]", "[MASK]", "[SEP]",
                                                         "[EOS]", ",",     "||"};
    return s;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus_tokens) {
    std::set<std::string> content(corpus_tokens.begin(), corpus_tokens.end());
    for (const char* s : special_tokens()) content.erase(s);
    content.insert("a");
    std::vector<std::string> toks;
    toks.reserve(n_special + content.size());
    for (const char* s : special_tokens()) toks.emplace_back(s);
    toks.insert(toks.end(), content.begin(), content.end());
    return from_token_list(toks);
}

Vocabulary Vocabulary::from_token_list(const std::vector<std::string>& toks) {
    Vocabulary v;
    if (toks.size() < static_cast<std::size_t>(n_special))
        throw ValidationError("vocabulary too small for special tokens");
    for (int i = 0; i < n_special; ++i)
        if (toks[i] != special_tokens()[i])
            throw ValidationError("vocabulary special token layout mismatch at id " +
                                  std::to_string(i));
    v.tokens = toks;
    for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
        if (toks[i].empty()) throw ValidationError("empty vocabulary token");
        if (!v.token_to_id.emplace(toks[i], i).second)
            throw ValidationError("duplicate vocabulary token: " + toks[i]);
    }
    auto it = v.token_to_id.find("a");
    if (it == v.token_to_id.end()) throw ValidationError("vocabulary missing required token 'a'");
    v.a_id = it->second;
    return v;
}

int Vocabulary::id_or_unk(std::string_view tok) const {
    auto it = token_to_id.find(std::string(tok));
    return it == token_to_id.end() ? unk_id : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    return encode(tokenize(text));
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id_or_unk(t));
    return out;
}

// --------------------------------------------------------------------- enums

const char* to_string(OwnerTag t) {
    switch (t) {
        case OwnerTag::FC: return "FC";
        case OwnerTag::STS: return "STS";
        case OwnerTag::NLI: return "NLI";
        case OwnerTag::LM: return "LM";
    }
    throw ValidationError("bad owner tag");
}

const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::classifier: return "classifier";
        case TaskKind::linear_logit: return "linear_logit";
        case TaskKind::pair_score: return "pair_score";
        case TaskKind::next_token: return "next_token";
    }
    throw ValidationError("bad task kind");
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::tanh_act: return "tanh";
        case Activation::identity: return "identity";
    }
    throw ValidationError("bad activation");
}

namespace {

OwnerTag owner_from_string(const std::string& s) {
    if (s == "FC") return OwnerTag::FC;
    if (s == "STS") return OwnerTag::STS;
    if (s == "NLI") return OwnerTag::NLI;
    if (s == "LM") return OwnerTag::LM;
    throw ValidationError("bad owner tag: " + s);
}

TaskKind kind_from_string(const std::string& s) {
    if (s == "classifier") return TaskKind::classifier;
    if (s == "linear_logit") return TaskKind::linear_logit;
    if (s == "pair_score") return TaskKind::pair_score;
    if (s == "next_token") return TaskKind::next_token;
    throw ValidationError("bad task kind: " + s);
}

Activation act_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh_act;
    if (s == "identity") return Activation::identity;
    throw ValidationError("bad activation: " + s);
}

} // namespace

// --------------------------------------------------------------------- model

EncoderModel make_model(std::shared_ptr<const Vocabulary> vocab, OwnerTag owner, TaskKind kind,
                        Activation act, int embed_dim, int hidden_dim, int out_dim,
                        int context_window, std::uint64_t init_seed) {
    if (!vocab) throw ConfigError("model requires a vocabulary");
    if (embed_dim < 1 || hidden_dim < 1 || out_dim < 1) throw ConfigError("model dims must be >= 1");
    if (kind == TaskKind::next_token) {
        if (out_dim != vocab->size())
            throw ConfigError("next_token models need out_dim == |V|");
        if (context_window < 2) throw ConfigError("context_window must be >= 2");
    }
    EncoderModel m;
    m.vocab = std::move(vocab);
    m.owner = owner;
    m.kind = kind;
    m.act = act;
    m.embed_dim = embed_dim;
    m.hidden_dim = hidden_dim;
    m.out_dim = out_dim;
    m.context_window = context_window;
    m.E.resize(m.vocab->size(), embed_dim);
    m.W1.resize(hidden_dim, embed_dim);
    m.b1.resize(hidden_dim);
    m.W2.resize(out_dim, hidden_dim);
    m.b2.resize(out_dim);

    Rng rng(init_seed);
    const double e_scale = 0.1;
    const double w1_scale = 1.0 / std::sqrt(double(embed_dim));
    const double w2_scale = 1.0 / std::sqrt(double(hidden_dim));
    for (int i = 0; i < m.E.rows(); ++i)
        for (int j = 0; j < m.E.cols(); ++j) m.E(i, j) = e_scale * rng.normal();
    for (int i = 0; i < m.W1.rows(); ++i)
        for (int j = 0; j < m.W1.cols(); ++j) m.W1(i, j) = w1_scale * rng.normal();
    for (int i = 0; i < m.b1.size(); ++i) m.b1(i) = 0.01 * rng.normal();
    for (int i = 0; i < m.W2.rows(); ++i)
        for (int j = 0; j < m.W2.cols(); ++j) m.W2(i, j) = w2_scale * rng.normal();
    m.b2.setZero();
    return m;
}

// ------------------------------------------------------------------ forwards

namespace {

void check_ids(const EncoderModel& m, const std::vector<int>& ids) {
    if (ids.empty()) throw ValidationError("empty token sequence");
    for (int t : ids)
        if (t < 0 || t >= m.vocab->size())
            throw IndexError("token id out of range: " + std::to_string(t));
}

inline Eigen::VectorXd embedding_at(const EncoderModel& m, const std::vector<int>& ids,
                                    std::size_t j, const SlotOverride* ov) {
    if (ov && static_cast<std::size_t>(ov->position) == j) return ov->vec;
    return m.E.row(ids[j]).transpose();
}

Eigen::VectorXd mean_pool(const EncoderModel& m, const std::vector<int>& ids,
                          const SlotOverride* ov) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(m.embed_dim);
    for (std::size_t j = 0; j < ids.size(); ++j) p += embedding_at(m, ids, j, ov);
    return p / double(ids.size());
}

inline Eigen::VectorXd apply_act(const EncoderModel& m, const Eigen::VectorXd& a) {
    if (m.act == Activation::tanh_act) return a.array().tanh().matrix();
    return a;
}

// act'(a) expressed through h = act(a).
inline Eigen::VectorXd act_prime_from_h(const EncoderModel& m, const Eigen::VectorXd& h) {
    if (m.act == Activation::tanh_act) return (1.0 - h.array().square()).matrix();
    return Eigen::VectorXd::Ones(h.size());
}

// log(sum_j exp(z_j)) with the max factored out; the uniform zero-logit case
// reduces to log(|V|) with no rounding beyond the single log call.
double log_sum_exp(const Eigen::VectorXd& z, double& zmax_out) {
    const double zmax = z.maxCoeff();
    double s = 0.0;
    for (int j = 0; j < z.size(); ++j) s += std::exp(z(j) - zmax);
    zmax_out = zmax;
    return zmax + std::log(s);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
    const double zmax = z.maxCoeff();
    Eigen::VectorXd p(z.size());
    double s = 0.0;
    for (int j = 0; j < z.size(); ++j) {
        p(j) = std::exp(z(j) - zmax);
        s += p(j);
    }
    return p / s;
}

struct PooledCtx {
    Eigen::VectorXd p, h, z;
    int n = 0;
};

PooledCtx pooled_forward(const EncoderModel& m, const std::vector<int>& ids,
                         const SlotOverride* ov, bool need_logits) {
    PooledCtx c;
    c.n = static_cast<int>(ids.size());
    c.p = mean_pool(m, ids, ov);
    c.h = apply_act(m, m.W1 * c.p + m.b1);
    if (need_logits) c.z = m.W2 * c.h + m.b2;
    return c;
}

void check_position(const std::vector<int>& ids, int position) {
    if (position < 0 || static_cast<std::size_t>(position) >= ids.size())
        throw IndexError("position " + std::to_string(position) + " out of range for length " +
                         std::to_string(ids.size()));
}

// Loss for one instance; optionally accumulates the gradient w.r.t. the
// vector fed at slot `position` into *gslot (override applied when ov_vec).
double loss_and_slot_grad(const EncoderModel& m, const Example& ex, int position,
                          const Eigen::VectorXd* ov_vec, Eigen::VectorXd* gslot) {
    SlotOverride ov;
    const SlotOverride* ovp = nullptr;
    if (position >= 0 && ov_vec) {
        ov.position = position;
        ov.vec = *ov_vec;
        ovp = &ov;
    }

    if (const auto* ce = std::get_if<ClsExample>(&ex)) {
        check_ids(m, ce->ids);
        if (position >= 0) check_position(ce->ids, position);
        if (ce->target < 0 || ce->target >= m.out_dim) throw IndexError("target out of range");
        PooledCtx c = pooled_forward(m, ce->ids, ovp, true);
        double loss;
        Eigen::VectorXd dz;
        if (m.kind == TaskKind::linear_logit) {
            loss = c.z(ce->target);
            if (gslot) {
                dz = Eigen::VectorXd::Zero(m.out_dim);
                dz(ce->target) = 1.0;
            }
        } else if (m.kind == TaskKind::classifier) {
            double zmax;
            loss = log_sum_exp(c.z, zmax) - c.z(ce->target);
            if (gslot) {
                dz = softmax(c.z);
                dz(ce->target) -= 1.0;
            }
        } else {
            throw ShapeError("classifier example fed to a non-classifier model");
        }
        if (gslot) {
            const Eigen::VectorXd da = act_prime_from_h(m, c.h).cwiseProduct(m.W2.transpose() * dz);
            *gslot += (m.W1.transpose() * da) / double(c.n);
        }
        return loss;
    }

    if (const auto* pe = std::get_if<PairExample>(&ex)) {
        if (m.kind != TaskKind::pair_score)
            throw ShapeError("pair example fed to a non-pair model");
        check_ids(m, pe->a);
        check_ids(m, pe->b);
        if (position >= 0) check_position(pe->a, position);
        PooledCtx ca = pooled_forward(m, pe->a, ovp, false);
        PooledCtx cb = pooled_forward(m, pe->b, nullptr, false);
        const double na = ca.h.norm(), nb = cb.h.norm();
        double c = 0.0;
        if (na > 0.0 && nb > 0.0) c = ca.h.dot(cb.h) / (na * nb);
        const double cc = std::clamp(c, -1.0, 1.0);
        const double s = 5.0 * std::max(0.0, cc);
        const double diff = pe->target - s;
        const double loss = diff * diff / 25.0;
        if (gslot) {
            const double ds = -2.0 * diff / 25.0;            // dL/ds
            const double dc = (c > 0.0 && c < 1.0) ? 5.0 : 0.0; // ds/dc, flat outside
            if (ds != 0.0 && dc != 0.0) {
                const Eigen::VectorXd dcdha = cb.h / (na * nb) - (c / (na * na)) * ca.h;
                const Eigen::VectorXd dha = (ds * dc) * dcdha;
                const Eigen::VectorXd da = act_prime_from_h(m, ca.h).cwiseProduct(dha);
                *gslot += (m.W1.transpose() * da) / double(ca.n);
            }
        }
        return loss;
    }

    const auto& se = std::get<SeqExample>(ex);
    if (m.kind != TaskKind::next_token)
        throw ShapeError("sequence example fed to a non-LM model");
    check_ids(m, se.ids);
    if (static_cast<int>(se.ids.size()) > m.context_window)
        throw ValidationError("sequence exceeds the context window");
    if (position >= 0) check_position(se.ids, position);
    const int n = static_cast<int>(se.ids.size());
    double total = 0.0;
    Eigen::VectorXd gacc = Eigen::VectorXd::Zero(m.embed_dim);
    Eigen::VectorXd ctx_sum = Eigen::VectorXd::Zero(m.embed_dim);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd ctx;
        if (i == 0)
            ctx = Eigen::VectorXd::Zero(m.embed_dim);
        else
            ctx = ctx_sum / double(i);
        const Eigen::VectorXd h = apply_act(m, m.W1 * ctx + m.b1);
        const Eigen::VectorXd z = m.W2 * h + m.b2;
        double zmax;
        const double lse = log_sum_exp(z, zmax);
        total += lse - z(se.ids[i]);
        if (gslot && position < i) {
            Eigen::VectorXd dz = softmax(z);
            dz(se.ids[i]) -= 1.0;
            const Eigen::VectorXd da = act_prime_from_h(m, h).cwiseProduct(m.W2.transpose() * dz);
            gacc += (m.W1.transpose() * da) / double(i);
        }
        ctx_sum += embedding_at(m, se.ids, i, ovp);
    }
    if (gslot) *gslot += gacc / double(n);
    return total / double(n);
}

} // namespace

Eigen::VectorXd encode_hidden(const EncoderModel& m, const std::vector<int>& ids,
                              const SlotOverride* ov) {
    check_ids(m, ids);
    if (ov) check_position(ids, ov->position);
    return pooled_forward(m, ids, ov, false).h;
}

Eigen::VectorXd apply_activation(const EncoderModel& m, const Eigen::VectorXd& preact) {
    return apply_act(m, preact);
}

double instance_loss(const EncoderModel& m, const Example& ex, const SlotOverride* ov) {
    if (!ov) return loss_and_slot_grad(m, ex, -1, nullptr, nullptr);
    return loss_and_slot_grad(m, ex, ov->position, &ov->vec, nullptr);
}

double forward_loss(const EncoderModel& m, const std::vector<Example>& batch,
                    const SlotOverride* ov) {
    if (batch.empty()) throw ValidationError("empty batch");
    double s = 0.0;
    for (const auto& ex : batch) s += instance_loss(m, ex, ov);
    return s / double(batch.size());
}

Eigen::MatrixXd grad_wrt_embeddings(const EncoderModel& m, const std::vector<Example>& batch,
                                    const std::vector<int>& positions) {
    if (batch.empty()) throw ValidationError("empty batch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<int>(positions.size()), m.embed_dim);
    for (std::size_t r = 0; r < positions.size(); ++r) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m.embed_dim);
        for (const auto& ex : batch) loss_and_slot_grad(m, ex, positions[r], nullptr, &g);
        out.row(r) = g / double(batch.size());
    }
    return out;
}

Eigen::VectorXd grad_wrt_slot(const EncoderModel& m, const std::vector<Example>& batch,
                              int position, const Eigen::VectorXd& v) {
    if (batch.empty()) throw ValidationError("empty batch");
    if (v.size() != m.embed_dim) throw ShapeError("slot vector has wrong dimension");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m.embed_dim);
    for (const auto& ex : batch) loss_and_slot_grad(m, ex, position, &v, &g);
    return g / double(batch.size());
}

Eigen::VectorXd finite_difference_grad(const EncoderModel& m, const std::vector<Example>& batch,
                                       int position, const Eigen::VectorXd& v, double epsilon) {
    if (epsilon <= 0.0) throw ConfigError("epsilon must be > 0");
    if (v.size() != m.embed_dim) throw ShapeError("slot vector has wrong dimension");
    Eigen::VectorXd g(m.embed_dim);
    Eigen::VectorXd probe = v;
    SlotOverride ov;
    ov.position = position;
    for (int k = 0; k < m.embed_dim; ++k) {
        probe(k) = v(k) + epsilon;
        ov.vec = probe;
        const double lp = forward_loss(m, batch, &ov);
        probe(k) = v(k) - epsilon;
        ov.vec = probe;
        const double lm = forward_loss(m, batch, &ov);
        probe(k) = v(k);
        g(k) = (lp - lm) / (2.0 * epsilon);
    }
    return g;
}

// ------------------------------------------------------------------ training

namespace {

void zero_grads(const EncoderModel& m, ParamGrads& g) {
    g.E = Eigen::MatrixXd::Zero(m.E.rows(), m.E.cols());
    g.W1 = Eigen::MatrixXd::Zero(m.W1.rows(), m.W1.cols());
    g.b1 = Eigen::VectorXd::Zero(m.b1.size());
    g.W2 = Eigen::MatrixXd::Zero(m.W2.rows(), m.W2.cols());
    g.b2 = Eigen::VectorXd::Zero(m.b2.size());
}

double instance_param_grads(const EncoderModel& m, const Example& ex, ParamGrads& g) {
    if (const auto* ce = std::get_if<ClsExample>(&ex)) {
        check_ids(m, ce->ids);
        if (ce->target < 0 || ce->target >= m.out_dim) throw IndexError("target out of range");
        PooledCtx c = pooled_forward(m, ce->ids, nullptr, true);
        double loss;
        Eigen::VectorXd dz;
        if (m.kind == TaskKind::linear_logit) {
            loss = c.z(ce->target);
            dz = Eigen::VectorXd::Zero(m.out_dim);
            dz(ce->target) = 1.0;
        } else if (m.kind == TaskKind::classifier) {
            double zmax;
            loss = log_sum_exp(c.z, zmax) - c.z(ce->target);
            dz = softmax(c.z);
            dz(ce->target) -= 1.0;
        } else {
            throw ShapeError("classifier example fed to a non-classifier model");
        }
        const Eigen::VectorXd da = act_prime_from_h(m, c.h).cwiseProduct(m.W2.transpose() * dz);
        g.W2 += dz * c.h.transpose();
        g.b2 += dz;
        g.W1 += da * c.p.transpose();
        g.b1 += da;
        const Eigen::VectorXd dp = (m.W1.transpose() * da) / double(c.n);
        for (int t : ce->ids) g.E.row(t) += dp.transpose();
        return loss;
    }

    if (const auto* pe = std::get_if<PairExample>(&ex)) {
        if (m.kind != TaskKind::pair_score)
            throw ShapeError("pair example fed to a non-pair model");
        check_ids(m, pe->a);
        check_ids(m, pe->b);
        PooledCtx ca = pooled_forward(m, pe->a, nullptr, false);
        PooledCtx cb = pooled_forward(m, pe->b, nullptr, false);
        const double na = ca.h.norm(), nb = cb.h.norm();
        double c = 0.0;
        if (na > 0.0 && nb > 0.0) c = ca.h.dot(cb.h) / (na * nb);
        const double cc = std::clamp(c, -1.0, 1.0);
        const double s = 5.0 * std::max(0.0, cc);
        const double diff = pe->target - s;
        const double loss = diff * diff / 25.0;
        const double ds = -2.0 * diff / 25.0;
        const double dc = (c > 0.0 && c < 1.0) ? 5.0 : 0.0;
        if (ds != 0.0 && dc != 0.0) {
            const double gscale = ds * dc;
            const Eigen::VectorXd dha =
                gscale * (cb.h / (na * nb) - (c / (na * na)) * ca.h);
            const Eigen::VectorXd dhb =
                gscale * (ca.h / (na * nb) - (c / (nb * nb)) * cb.h);
            const Eigen::VectorXd daa = act_prime_from_h(m, ca.h).cwiseProduct(dha);
            const Eigen::VectorXd dab = act_prime_from_h(m, cb.h).cwiseProduct(dhb);
            g.W1 += daa * ca.p.transpose() + dab * cb.p.transpose();
            g.b1 += daa + dab;
            const Eigen::VectorXd dpa = (m.W1.transpose() * daa) / double(ca.n);
            const Eigen::VectorXd dpb = (m.W1.transpose() * dab) / double(cb.n);
            for (int t : pe->a) g.E.row(t) += dpa.transpose();
            for (int t : pe->b) g.E.row(t) += dpb.transpose();
        }
        return loss;
    }

    const auto& se = std::get<SeqExample>(ex);
    if (m.kind != TaskKind::next_token)
        throw ShapeError("sequence example fed to a non-LM model");
    check_ids(m, se.ids);
    if (static_cast<int>(se.ids.size()) > m.context_window)
        throw ValidationError("sequence exceeds the context window");
    const int n = static_cast<int>(se.ids.size());
    const double inv_n = 1.0 / double(n);
    double total = 0.0;
    Eigen::VectorXd ctx_sum = Eigen::VectorXd::Zero(m.embed_dim);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd ctx;
        if (i == 0)
            ctx = Eigen::VectorXd::Zero(m.embed_dim);
        else
            ctx = ctx_sum / double(i);
        const Eigen::VectorXd h = apply_act(m, m.W1 * ctx + m.b1);
        const Eigen::VectorXd z = m.W2 * h + m.b2;
        double zmax;
        const double lse = log_sum_exp(z, zmax);
        total += lse - z(se.ids[i]);
        Eigen::VectorXd dz = softmax(z);
        dz(se.ids[i]) -= 1.0;
        dz *= inv_n;
        const Eigen::VectorXd da = act_prime_from_h(m, h).cwiseProduct(m.W2.transpose() * dz);
        g.W2 += dz * h.transpose();
        g.b2 += dz;
        g.W1 += da * ctx.transpose();
        g.b1 += da;
        if (i > 0) {
            const Eigen::VectorXd dp = (m.W1.transpose() * da) / double(i);
            for (int j = 0; j < i; ++j) g.E.row(se.ids[j]) += dp.transpose();
        }
        ctx_sum += m.E.row(se.ids[i]).transpose();
    }
    return total * inv_n;
}

} // namespace

double loss_and_param_grads(const EncoderModel& m, const std::vector<Example>& batch,
                            ParamGrads& out) {
    if (batch.empty()) throw ValidationError("empty batch");
    zero_grads(m, out);
    double s = 0.0;
    for (const auto& ex : batch) s += instance_param_grads(m, ex, out);
    const double inv = 1.0 / double(batch.size());
    out.E *= inv;
    out.W1 *= inv;
    out.b1 *= inv;
    out.W2 *= inv;
    out.b2 *= inv;
    return s * inv;
}

void run_sgd_epoch(EncoderModel& m, const std::vector<Example>& data,
                   const std::vector<int>& order, double lr, int batch_size, int epoch_index) {
    ParamGrads g;
    std::vector<Example> batch;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        batch.clear();
        const std::size_t end = std::min(order.size(), start + batch_size);
        for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
        const double loss = loss_and_param_grads(m, batch, g);
        if (!std::isfinite(loss))
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch_index));
        m.E -= lr * g.E;
        m.W1 -= lr * g.W1;
        m.b1 -= lr * g.b1;
        m.W2 -= lr * g.W2;
        m.b2 -= lr * g.b2;
    }
}

namespace {

double full_loss(const EncoderModel& m, const std::vector<Example>& data) {
    double s = 0.0;
    for (const auto& ex : data) s += instance_loss(m, ex);
    return s / double(data.size());
}

struct ParamSnapshot {
    Eigen::MatrixXd E, W1, W2;
    Eigen::VectorXd b1, b2;

    static ParamSnapshot take(const EncoderModel& m) {
        return {m.E, m.W1, m.W2, m.b1, m.b2};
    }
    void restore(EncoderModel& m) const {
        m.E = E;
        m.W1 = W1;
        m.W2 = W2;
        m.b1 = b1;
        m.b2 = b2;
    }
};

} // namespace

TrainTrace train_model(EncoderModel& m, const std::vector<Example>& data,
                       const TrainHyper& hyper) {
    if (data.empty()) throw ValidationError("training data is empty");
    if (hyper.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (hyper.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(hyper.lr > 0.0) || !std::isfinite(hyper.lr)) throw ConfigError("bad learning rate");

    TrainTrace trace;
    if (hyper.epochs == 0) return trace;

    Rng rng(hyper.seed);
    std::vector<int> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    ParamSnapshot best;
    double best_loss = 0.0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        run_sgd_epoch(m, data, order, hyper.lr, hyper.batch_size, epoch);
        const double l = full_loss(m, data);
        if (!std::isfinite(l))
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
        trace.epoch_losses.push_back(l);
        if (trace.best_epoch < 0 || l < best_loss) {
            best_loss = l;
            trace.best_epoch = epoch;
            best = ParamSnapshot::take(m);
        }
    }
    best.restore(m);
    trace.best_loss = best_loss;
    return trace;
}

// --------------------------------------------------------------- checkpoints

namespace {

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vec_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::MatrixXd mat_from_json(const json& j, int rows, int cols, const char* name) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw ValidationError(std::string("checkpoint matrix shape mismatch: ") + name);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ValidationError(std::string("checkpoint matrix shape mismatch: ") + name);
        for (int c = 0; c < cols; ++c) m(i, c) = row[c].get<double>();
    }
    return m;
}

Eigen::VectorXd vec_from_json(const json& j, int n, const char* name) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw ValidationError(std::string("checkpoint vector shape mismatch: ") + name);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = j[i].get<double>();
    return v;
}

} // namespace

void save_checkpoint(const EncoderModel& m, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["owner"] = to_string(m.owner);
    j["kind"] = to_string(m.kind);
    j["activation"] = to_string(m.act);
    j["embed_dim"] = m.embed_dim;
    j["hidden_dim"] = m.hidden_dim;
    j["out_dim"] = m.out_dim;
    j["context_window"] = m.context_window;
    j["vocab"] = m.vocab->tokens;
    j["E"] = mat_to_json(m.E);
    j["W1"] = mat_to_json(m.W1);
    j["b1"] = vec_to_json(m.b1);
    j["W2"] = mat_to_json(m.W2);
    j["b2"] = vec_to_json(m.b2);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << j.dump() << '\n';
    if (!out) throw IoError("checkpoint write failed: " + path);
}

EncoderModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("checkpoint " + path + ": " + e.what());
    }
    if (!j.is_object() || j.value("format_version", -1) != 1)
        throw ValidationError("checkpoint " + path + ": unsupported format");
    EncoderModel m;
    m.owner = owner_from_string(j.at("owner").get<std::string>());
    m.kind = kind_from_string(j.at("kind").get<std::string>());
    m.act = act_from_string(j.at("activation").get<std::string>());
    m.embed_dim = j.at("embed_dim").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.out_dim = j.at("out_dim").get<int>();
    m.context_window = j.at("context_window").get<int>();
    m.vocab = std::make_shared<const Vocabulary>(
        Vocabulary::from_token_list(j.at("vocab").get<std::vector<std::string>>()));
    if (m.embed_dim < 1 || m.hidden_dim < 1 || m.out_dim < 1)
        throw ValidationError("checkpoint " + path + ": bad dims");
    m.E = mat_from_json(j.at("E"), m.vocab->size(), m.embed_dim, "E");
    m.W1 = mat_from_json(j.at("W1"), m.hidden_dim, m.embed_dim, "W1");
    m.b1 = vec_from_json(j.at("b1"), m.hidden_dim, "b1");
    m.W2 = mat_from_json(j.at("W2"), m.out_dim, m.hidden_dim, "W2");
    m.b2 = vec_from_json(j.at("b2"), m.out_dim, "b2");
    return m;
}

} // namespace uat
