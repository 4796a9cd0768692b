#include "uat/trigger_search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"
#include "uat/rng.hpp"
#include "uat/text.hpp"

namespace uat {

using nlohmann::json;

const char* label_short(Label l) {
    switch (l) {
        case Label::SUPPORTS: return "S";
        case Label::REFUTES: return "R";
        case Label::NEI: return "NEI";
    }
    throw ValidationError("invalid label value");
}

std::string AttackDirection::name() const {
    return std::string(label_short(source)) + "->" + label_short(target);
}

AttackDirection make_direction(Label source, Label target) {
    if (source == target) throw ValidationError("attack direction requires source != target");
    return {source, target};
}

namespace {

Label label_from_short(std::string_view s) {
    if (s == "S") return Label::SUPPORTS;
    if (s == "R") return Label::REFUTES;
    if (s == "NEI") return Label::NEI;
    throw ValidationError("bad class tag: " + std::string(s));
}

} // namespace

AttackDirection direction_from_string(std::string_view s) {
    const auto pos = s.find("->");
    if (pos == std::string_view::npos)
        throw ValidationError("bad direction (want e.g. S->R): " + std::string(s));
    return make_direction(label_from_short(s.substr(0, pos)), label_from_short(s.substr(pos + 2)));
}

const std::vector<AttackDirection>& all_directions() {
    static const std::vector<AttackDirection> dirs = {
        {Label::SUPPORTS, Label::REFUTES}, {Label::SUPPORTS, Label::NEI},
        {Label::REFUTES, Label::SUPPORTS}, {Label::REFUTES, Label::NEI},
        {Label::NEI, Label::SUPPORTS},     {Label::NEI, Label::REFUTES},
    };
    return dirs;
}

const char* to_string(ObjectiveMode m) {
    switch (m) {
        case ObjectiveMode::FC: return "FC";
        case ObjectiveMode::FC_STS: return "FC_STS";
    }
    throw ValidationError("bad objective mode");
}

ObjectiveMode mode_from_string(std::string_view s) {
    std::string up;
    for (char c : s) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (up == "FC") return ObjectiveMode::FC;
    if (up == "FC_STS" || up == "FC+STS" || up == "FCSTS") return ObjectiveMode::FC_STS;
    throw ValidationError("bad objective mode: " + std::string(s));
}

void validate(const TriggerSearchConfig& c) {
    if (c.epochs < 1) throw ConfigError("trigger search epochs must be >= 1");
    if (c.top_k < 1) throw ConfigError("top_k must be >= 1");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(c.fc_weight > 0.0) || !(c.sts_weight > 0.0))
        throw ConfigError("objective weights must be > 0");
    if (std::abs(c.fc_weight + c.sts_weight - 1.0) > 1e-12)
        throw ConfigError("objective weights must sum to 1");
}

std::set<int> default_exclusions(const Vocabulary&) {
    std::set<int> out;
    for (int i = 0; i < Vocabulary::n_special; ++i) out.insert(i);
    return out;
}

void GradientAccumulator::add_batch(const Eigen::VectorXd& batch_sum_grad, int n_instances) {
    if (n_instances < 1) throw AttackError("empty gradient batch");
    if (sum.size() == 0)
        sum = batch_sum_grad;
    else if (sum.size() != batch_sum_grad.size())
        throw ShapeError("gradient dimension mismatch in accumulator");
    else
        sum += batch_sum_grad;
    ++batch_count;
    instance_count += n_instances;
}

Eigen::VectorXd GradientAccumulator::average() const {
    if (batch_count < 1) throw AttackError("gradient accumulator is empty");
    return sum / double(instance_count);
}

namespace {

void check_slice(const std::vector<ClaimInstance>& slice, const TriggerState& trigger) {
    if (slice.empty()) throw AttackError("empty source-class slice");
    for (const auto& inst : slice)
        if (inst.label != trigger.direction.source)
            throw ValidationError("slice instance " + inst.id + " is not of the source class");
}

std::vector<int> triggered_fc_ids(const Vocabulary& v, int trigger_id,
                                  const ClaimInstance& inst) {
    std::vector<int> ids;
    const auto claim = v.encode(inst.claim);
    const auto ev = v.encode(inst.evidence);
    ids.reserve(claim.size() + ev.size() + 2);
    ids.push_back(trigger_id);
    ids.insert(ids.end(), claim.begin(), claim.end());
    ids.push_back(v.sep_id);
    ids.insert(ids.end(), ev.begin(), ev.end());
    return ids;
}

} // namespace

GradientAccumulator accumulate_gradients(const FactCheckModel& fc,
                                         const std::vector<ClaimInstance>& slice,
                                         const TriggerState& trigger, int batch_size) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    check_slice(slice, trigger);
    const Vocabulary& v = *fc.m.vocab;
    if (trigger.token_id < 0 || trigger.token_id >= v.size())
        throw IndexError("trigger token id out of range");
    const Eigen::VectorXd e_alpha = fc.m.E.row(trigger.token_id).transpose();
    const int target = static_cast<int>(trigger.direction.target);

    GradientAccumulator acc;
    std::vector<Example> batch;
    for (std::size_t start = 0; start < slice.size(); start += batch_size) {
        batch.clear();
        const std::size_t end = std::min(slice.size(), start + batch_size);
        for (std::size_t k = start; k < end; ++k)
            batch.push_back(ClsExample{triggered_fc_ids(v, trigger.token_id, slice[k]), target});
        const Eigen::VectorXd mean = grad_wrt_slot(fc.m, batch, 0, e_alpha);
        acc.add_batch(mean * double(batch.size()), static_cast<int>(batch.size()));
    }
    return acc;
}

GradientAccumulator accumulate_sts_gradients(const StsModel& sts,
                                             const std::vector<ClaimInstance>& slice,
                                             const TriggerState& trigger, int batch_size) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    check_slice(slice, trigger);
    const Vocabulary& v = *sts.m.vocab;
    if (trigger.token_id < 0 || trigger.token_id >= v.size())
        throw IndexError("trigger token id out of range");
    const Eigen::VectorXd o_alpha = sts.m.E.row(trigger.token_id).transpose();

    GradientAccumulator acc;
    std::vector<Example> batch;
    for (std::size_t start = 0; start < slice.size(); start += batch_size) {
        batch.clear();
        const std::size_t end = std::min(slice.size(), start + batch_size);
        for (std::size_t k = start; k < end; ++k) {
            const auto claim = v.encode(slice[k].claim);
            std::vector<int> trig;
            trig.reserve(claim.size() + 1);
            trig.push_back(trigger.token_id);
            trig.insert(trig.end(), claim.begin(), claim.end());
            batch.push_back(PairExample{std::move(trig), claim, 5.0});
        }
        const Eigen::VectorXd mean = grad_wrt_slot(sts.m, batch, 0, o_alpha);
        acc.add_batch(mean * double(batch.size()), static_cast<int>(batch.size()));
    }
    return acc;
}

std::vector<double> taylor_scores(const Eigen::VectorXd& grad, const Eigen::VectorXd& trigger_emb,
                                  const Eigen::MatrixXd& table) {
    if (grad.size() != table.cols() || trigger_emb.size() != table.cols())
        throw ShapeError("taylor_scores dimension mismatch");
    const double base = trigger_emb.dot(grad);
    const Eigen::VectorXd prods = table * grad;
    std::vector<double> out(table.rows());
    for (int i = 0; i < table.rows(); ++i) out[i] = prods(i) - base;
    return out;
}

namespace {

std::vector<double> min_max_normalize(const std::vector<double>& x) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(x.size(), 0.0);
    if (!(hi > lo)) return out; // constant vector -> all zeros
    const double span = hi - lo;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - lo) / span;
    return out;
}

} // namespace

std::vector<double> combine_objectives(const std::vector<double>& fc_scores,
                                       const std::vector<double>& sts_scores,
                                       const TriggerSearchConfig& config) {
    validate(config);
    if (fc_scores.size() != sts_scores.size())
        throw ShapeError("combine_objectives length mismatch");
    const auto fcn = min_max_normalize(fc_scores);
    const auto stn = min_max_normalize(sts_scores);
    std::vector<double> out(fcn.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = config.fc_weight * fcn[i] + config.sts_weight * stn[i];
    return out;
}

EpochScores epoch_candidate_scores(const TriggerState& state, const AttackModels& models,
                                   const std::vector<ClaimInstance>& slice,
                                   const TriggerSearchConfig& config) {
    validate(config);
    if (!models.fc) throw ConfigError("FC model is required");
    if (state.mode == ObjectiveMode::FC_STS && !models.sts)
        throw ConfigError("STS model is required in FC_STS mode");

    EpochScores s;
    const auto gfc = accumulate_gradients(*models.fc, slice, state, config.batch_size).average();
    s.fc = taylor_scores(gfc, models.fc->m.E.row(state.token_id).transpose(), models.fc->m.E);
    if (state.mode == ObjectiveMode::FC_STS) {
        const auto gsts =
            accumulate_sts_gradients(*models.sts, slice, state, config.batch_size).average();
        s.sts =
            taylor_scores(gsts, models.sts->m.E.row(state.token_id).transpose(), models.sts->m.E);
        s.key = combine_objectives(s.fc, s.sts, config);
    } else {
        s.key = s.fc;
    }
    return s;
}

namespace {

int argmin_eligible(const std::vector<double>& key, const std::set<int>& exclusions,
                    int current_token) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(key.size()); ++i) {
        if (i == current_token || exclusions.count(i)) continue;
        if (best < 0 || key[i] < key[best]) best = i;
    }
    if (best < 0) throw AttackError("all candidate tokens are excluded");
    return best;
}

} // namespace

TriggerState epoch_update(const TriggerState& state, const AttackModels& models,
                          const std::vector<ClaimInstance>& slice,
                          const TriggerSearchConfig& config) {
    const EpochScores s = epoch_candidate_scores(state, models, slice, config);
    TriggerState next = state;
    next.token_id = argmin_eligible(s.key, config.candidate_exclusions, state.token_id);
    next.epoch = state.epoch + 1;
    return next;
}

namespace {

double mean_target_ce(const FactCheckModel& fc, const std::vector<ClaimInstance>& slice,
                      Label target, int trigger_id /* -1 = none */) {
    const Vocabulary& v = *fc.m.vocab;
    double s = 0.0;
    for (const auto& inst : slice) {
        std::vector<int> ids;
        if (trigger_id >= 0)
            ids = triggered_fc_ids(v, trigger_id, inst);
        else {
            ids = pack_pair(v, inst.claim, inst.evidence);
        }
        s += instance_loss(fc.m, ClsExample{std::move(ids), static_cast<int>(target)});
    }
    return s / double(slice.size());
}

double mean_sts_loss_for_trigger(const StsModel& sts, const std::vector<ClaimInstance>& slice,
                                 const std::string& token) {
    double s = 0.0;
    for (const auto& inst : slice) s += sts_loss(sts, inst.claim, token + " " + inst.claim);
    return s / double(slice.size());
}

} // namespace

RankedTriggers search_triggers(AttackDirection direction, ObjectiveMode mode,
                               const AttackModels& models, const Dataset& dataset,
                               const TriggerSearchConfig& config, std::uint64_t seed) {
    validate(config);
    if (!models.fc) throw ConfigError("FC model is required");
    if (mode == ObjectiveMode::FC_STS && !models.sts)
        throw ConfigError("STS model is required in FC_STS mode");
    const Vocabulary& v = *models.fc->m.vocab;

    auto slice = instances_with_label(dataset, direction.source);
    if (static_cast<int>(slice.size()) < config.batch_size)
        throw ValidationError("dataset has fewer than batch_size instances of class " +
                              std::string(label_short(direction.source)));
    if (slice.size() < 2)
        throw ValidationError("need at least 2 source-class instances to split");

    Rng rng(derive_seed(seed, "trigger_search.split." + direction.name() + "." +
                                  to_string(mode)));
    rng.shuffle(slice);
    const std::size_t half = slice.size() / 2;
    const std::vector<ClaimInstance> grad_slice(slice.begin(), slice.begin() + half);
    const std::vector<ClaimInstance> holdout(slice.begin() + half, slice.end());

    TriggerState state;
    state.direction = direction;
    state.mode = mode;
    state.epoch = 0;
    state.token_id = (mode == ObjectiveMode::FC) ? v.a_id : v.mask_id;

    std::set<int> pool;
    for (int e = 0; e < config.epochs; ++e) {
        const EpochScores scores = epoch_candidate_scores(state, models, grad_slice, config);
        const int best = argmin_eligible(scores.key, config.candidate_exclusions, state.token_id);
        if (e == config.epochs - 1) {
            // final epoch: also pool the top-k Taylor candidates
            std::vector<int> ids;
            for (int i = 0; i < static_cast<int>(scores.key.size()); ++i)
                if (i != state.token_id && !config.candidate_exclusions.count(i)) ids.push_back(i);
            std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
                if (scores.key[a] != scores.key[b]) return scores.key[a] < scores.key[b];
                return a < b;
            });
            for (int i = 0; i < std::min<int>(config.top_k, static_cast<int>(ids.size())); ++i)
                pool.insert(ids[i]);
        }
        pool.insert(best);
        state.token_id = best;
        state.epoch = e + 1;
    }

    // Realized held-out objective; improvement over the no-trigger baseline.
    const double base_ce = mean_target_ce(*models.fc, holdout, direction.target, -1);
    const double base_obj = (mode == ObjectiveMode::FC) ? base_ce : config.fc_weight * base_ce;
    std::vector<RankedTrigger> kept;
    for (int tok : pool) {
        const double ce = mean_target_ce(*models.fc, holdout, direction.target, tok);
        double obj = ce;
        if (mode == ObjectiveMode::FC_STS)
            obj = config.fc_weight * ce +
                  config.sts_weight * mean_sts_loss_for_trigger(*models.sts, holdout, v.tokens[tok]);
        const double improvement = base_obj - obj;
        if (improvement > 0.0) kept.push_back({v.tokens[tok], improvement});
    }
    std::stable_sort(kept.begin(), kept.end(), [&](const RankedTrigger& a, const RankedTrigger& b) {
        if (a.improvement != b.improvement) return a.improvement > b.improvement;
        return v.token_to_id.at(a.token) < v.token_to_id.at(b.token);
    });
    if (static_cast<int>(kept.size()) > config.top_k) kept.resize(config.top_k);

    RankedTriggers out;
    out.direction = direction;
    out.mode = mode;
    out.entries = std::move(kept);
    out.seed = seed;
    out.config = config;
    return out;
}

std::vector<std::pair<int, double>> brute_force_ranking(const FactCheckModel& fc,
                                                        const std::vector<ClaimInstance>& slice,
                                                        AttackDirection direction, int position) {
    if (slice.empty()) throw AttackError("empty source-class slice");
    const Vocabulary& v = *fc.m.vocab;
    const int target = static_cast<int>(direction.target);

    // Pre-encode claims/evidence once; insert the candidate per evaluation.
    std::vector<std::vector<int>> claims, evs;
    for (const auto& inst : slice) {
        claims.push_back(v.encode(inst.claim));
        evs.push_back(v.encode(inst.evidence));
        if (position < 0 || static_cast<std::size_t>(position) > claims.back().size())
            throw IndexError("insert position out of range for claim " + inst.id);
    }

    std::vector<std::pair<int, double>> out;
    out.reserve(v.size());
    for (int w = 0; w < v.size(); ++w) {
        double s = 0.0;
        for (std::size_t k = 0; k < claims.size(); ++k) {
            std::vector<int> ids;
            ids.reserve(claims[k].size() + evs[k].size() + 2);
            ids.insert(ids.end(), claims[k].begin(), claims[k].begin() + position);
            ids.push_back(w);
            ids.insert(ids.end(), claims[k].begin() + position, claims[k].end());
            ids.push_back(v.sep_id);
            ids.insert(ids.end(), evs[k].begin(), evs[k].end());
            s += instance_loss(fc.m, ClsExample{std::move(ids), target});
        }
        out.emplace_back(w, s / double(claims.size()));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    return out;
}

ClaimInstance apply_trigger(const ClaimInstance& instance, std::string_view trigger_token) {
    if (trigger_token.empty()) throw ValidationError("empty trigger token");
    for (char c : trigger_token)
        if (std::isspace(static_cast<unsigned char>(c)))
            throw ValidationError("trigger token must be a single token");
    ClaimInstance out = instance;
    out.claim = std::string(trigger_token) + " " + instance.claim;
    out.id = instance.id + "::" + std::string(trigger_token);
    return out;
}

void save_triggers(const RankedTriggers& t, const std::string& path) {
    json j;
    j["direction"] = t.direction.name();
    j["mode"] = to_string(t.mode);
    j["seed"] = t.seed;
    json cfg;
    cfg["epochs"] = t.config.epochs;
    cfg["top_k"] = t.config.top_k;
    cfg["fc_weight"] = t.config.fc_weight;
    cfg["sts_weight"] = t.config.sts_weight;
    cfg["batch_size"] = t.config.batch_size;
    cfg["candidate_exclusions"] = t.config.candidate_exclusions;
    j["config"] = std::move(cfg);
    json arr = json::array();
    for (const auto& e : t.entries) arr.push_back({{"token", e.token}, {"improvement", e.improvement}});
    j["triggers"] = std::move(arr);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write triggers file " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("triggers write failed: " + path);
}

RankedTriggers load_triggers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open triggers file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("triggers file " + path + ": " + e.what());
    }
    RankedTriggers t;
    try {
        t.direction = direction_from_string(j.at("direction").get<std::string>());
        t.mode = mode_from_string(j.at("mode").get<std::string>());
        t.seed = j.at("seed").get<std::uint64_t>();
        const auto& cfg = j.at("config");
        t.config.epochs = cfg.at("epochs").get<int>();
        t.config.top_k = cfg.at("top_k").get<int>();
        t.config.fc_weight = cfg.at("fc_weight").get<double>();
        t.config.sts_weight = cfg.at("sts_weight").get<double>();
        t.config.batch_size = cfg.at("batch_size").get<int>();
        t.config.candidate_exclusions =
            cfg.at("candidate_exclusions").get<std::set<int>>();
        for (const auto& e : j.at("triggers"))
            t.entries.push_back(
                {e.at("token").get<std::string>(), e.at("improvement").get<double>()});
    } catch (const json::exception& e) {
        throw ParseError("triggers file " + path + ": " + e.what());
    }
    return t;
}

} // namespace uat
