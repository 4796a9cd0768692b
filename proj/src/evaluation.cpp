#include "uat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"

namespace uat {

using nlohmann::json;

long ConfusionMatrix::total() const {
    long t = 0;
    for (const auto& row : counts)
        for (long c : row) t += c;
    return t;
}

ConfusionMatrix confusion(const std::vector<Label>& predictions, const std::vector<Label>& golds) {
    if (predictions.size() != golds.size())
        throw ValidationError("predictions/golds length mismatch");
    if (predictions.empty()) throw ValidationError("no predictions to score");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < golds.size(); ++i) cm.add(golds[i], predictions[i]);
    return cm;
}

double class_f1(const ConfusionMatrix& cm, int cls) {
    if (cls < 0 || cls > 2) throw IndexError("class index out of range");
    const long tp = cm.counts[cls][cls];
    long fp = 0, fn = 0;
    for (int g = 0; g < 3; ++g)
        if (g != cls) fp += cm.counts[g][cls];
    for (int p = 0; p < 3; ++p)
        if (p != cls) fn += cm.counts[cls][p];
    const double prec = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
    const double rec = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
    return (prec + rec > 0.0) ? 2.0 * prec * rec / (prec + rec) : 0.0;
}

double macro_f1(const ConfusionMatrix& cm) {
    return (class_f1(cm, 0) + class_f1(cm, 1) + class_f1(cm, 2)) / 3.0;
}

double macro_f1(const std::vector<Label>& predictions, const std::vector<Label>& golds) {
    return macro_f1(confusion(predictions, golds));
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mean_std of an empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    const double mean = s / double(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / double(values.size()))};
}

namespace {

struct TriggerEval {
    double f1, sts, ppl;
};

std::vector<Label> slice_predictions(const FactCheckModel& fc,
                                     const std::vector<ClaimInstance>& slice) {
    std::vector<Label> preds;
    preds.reserve(slice.size());
    for (const auto& inst : slice) preds.push_back(fc_predict(fc, inst.claim, inst.evidence).first);
    return preds;
}

TriggerEval eval_trigger(const FactCheckModel& fc, const StsModel& sts, const ConditionalLm& lm,
                         const std::vector<ClaimInstance>& slice, const std::string& token) {
    std::vector<Label> preds, golds;
    double sts_sum = 0.0, ppl_sum = 0.0;
    for (const auto& inst : slice) {
        const ClaimInstance atk = apply_trigger(inst, token);
        preds.push_back(fc_predict(fc, atk.claim, atk.evidence).first);
        golds.push_back(inst.label);
        sts_sum += sts_score(sts, inst.claim, atk.claim);
        ppl_sum += lm_perplexity(lm, atk.claim);
    }
    const double n = double(slice.size());
    return {macro_f1(preds, golds), sts_sum / n, ppl_sum / n};
}

AttackReportRow make_row(const std::string& label, const std::vector<TriggerEval>& evals) {
    std::vector<double> f1s, stss, ppls;
    for (const auto& e : evals) {
        f1s.push_back(e.f1);
        stss.push_back(e.sts);
        ppls.push_back(e.ppl);
    }
    AttackReportRow row;
    row.label = label;
    row.f1 = mean_std(f1s);
    row.sts = mean_std(stss);
    row.ppl = mean_std(ppls);
    row.n_triggers = static_cast<int>(evals.size());
    return row;
}

} // namespace

AttackReport attack_report(const FactCheckModel& fc, const StsModel& sts, const ConditionalLm& lm,
                           const std::vector<RankedTriggers>& triggers, const Dataset& dataset) {
    if (dataset.instances.empty()) throw ValidationError("empty evaluation dataset");

    AttackReport rep;
    if (!triggers.empty()) {
        rep.mode = triggers.front().mode;
        for (const auto& t : triggers)
            if (t.mode != rep.mode) throw ValidationError("mixed objective modes in one report");
    }

    // Baseline: the untouched dataset. STS of a text with itself is exactly 5.
    {
        std::vector<Label> golds;
        double ppl_sum = 0.0;
        for (const auto& inst : dataset.instances) {
            golds.push_back(inst.label);
            ppl_sum += lm_perplexity(lm, inst.claim);
        }
        rep.baseline.label = "baseline";
        rep.baseline.f1 = {macro_f1(slice_predictions(fc, dataset.instances), golds), 0.0};
        rep.baseline.sts = {5.0, 0.0};
        rep.baseline.ppl = {ppl_sum / double(dataset.instances.size()), 0.0};
        rep.baseline.n_triggers = 0;
    }

    std::vector<TriggerEval> pooled;
    for (const auto& rt : triggers) {
        if (rt.entries.empty())
            throw ValidationError("no triggers for direction " + rt.direction.name());
        const auto slice = instances_with_label(dataset, rt.direction.source);
        if (slice.empty())
            throw ValidationError("no instances of class " +
                                  std::string(label_short(rt.direction.source)));

        std::vector<Label> golds(slice.size(), rt.direction.source);
        rep.direction_baseline_f1.emplace_back(rt.direction.name(),
                                               macro_f1(slice_predictions(fc, slice), golds));

        std::vector<TriggerEval> evals;
        for (const auto& e : rt.entries) {
            evals.push_back(eval_trigger(fc, sts, lm, slice, e.token));
            pooled.push_back(evals.back());
        }
        rep.directions.push_back(make_row(rt.direction.name(), evals));
    }
    if (!pooled.empty()) {
        rep.has_all = true;
        rep.all = make_row("All", pooled);
    }
    return rep;
}

namespace {

std::string fmt_ms(const MeanStd& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f±%.3f", m.mean, m.stddev);
    return buf;
}

void append_row(std::string& out, const AttackReportRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %15s %15s %17s %9d\n", r.label.c_str(),
                  fmt_ms(r.f1).c_str(), fmt_ms(r.sts).c_str(), fmt_ms(r.ppl).c_str(),
                  r.n_triggers);
    out += buf;
}

json row_json(const AttackReportRow& r) {
    json j;
    j["label"] = r.label;
    j["f1"] = {{"mean", r.f1.mean}, {"std", r.f1.stddev}};
    j["sts"] = {{"mean", r.sts.mean}, {"std", r.sts.stddev}};
    j["ppl"] = {{"mean", r.ppl.mean}, {"std", r.ppl.stddev}};
    j["n_triggers"] = r.n_triggers;
    return j;
}

} // namespace

std::string render_attack_report(const AttackReport& r) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "objective: %s\n", to_string(r.mode));
    out += buf;
    std::snprintf(buf, sizeof buf, "%-10s %15s %15s %17s %9s\n", "Class", "F1", "STS", "PPL",
                  "Triggers");
    out += buf;
    append_row(out, r.baseline);
    for (const auto& row : r.directions) append_row(out, row);
    if (r.has_all) append_row(out, r.all);
    return out;
}

std::string attack_report_json(const AttackReport& r) {
    json j;
    j["mode"] = to_string(r.mode);
    j["baseline"] = row_json(r.baseline);
    json dirs = json::array();
    for (const auto& row : r.directions) dirs.push_back(row_json(row));
    j["directions"] = std::move(dirs);
    if (r.has_all) j["all"] = row_json(r.all);
    json bf = json::object();
    for (const auto& [name, f1] : r.direction_baseline_f1) bf[name] = f1;
    j["direction_baseline_f1"] = std::move(bf);
    j["all_row_aggregation"] = "pooled per-trigger values across directions";
    return j.dump(2) + "\n";
}

std::vector<QualityAnnotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotations file " + path);
    std::vector<QualityAnnotation> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            QualityAnnotation a;
            a.claim_id = j.at("claim_id").get<std::string>();
            a.quality = j.at("quality").get<int>();
            a.label = label_from_string(j.at("label").get<std::string>());
            if (a.quality < 1 || a.quality > 5)
                throw ValidationError(path + ":" + std::to_string(lineno) +
                                      ": quality must be in 1..5");
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<GenerationReportRow> generation_report(
    const FactCheckModel& fc, const std::vector<GeneratedClaim>& kept_claims, const Dataset& dataset,
    const std::vector<QualityAnnotation>* annotations) {
    std::map<std::string, const ClaimInstance*> by_id;
    for (const auto& inst : dataset.instances) by_id[inst.id] = &inst;

    std::map<std::string, std::vector<int>> quality_by_claim;
    if (annotations) {
        std::map<std::string, bool> claim_ids;
        for (const auto& c : kept_claims) claim_ids[c.id] = true;
        for (const auto& a : *annotations) {
            if (!claim_ids.count(a.claim_id))
                throw ValidationError("annotation for unknown claim id " + a.claim_id);
            quality_by_claim[a.claim_id].push_back(a.quality);
        }
    }

    std::vector<Label> preds, golds;
    std::vector<std::string> ids;
    for (const auto& c : kept_claims) {
        const auto it = by_id.find(c.evidence_id);
        if (it == by_id.end())
            throw ValidationError("generated claim " + c.id + " references unknown evidence id " +
                                  c.evidence_id);
        preds.push_back(fc_predict(fc, c.text, it->second->evidence).first);
        golds.push_back(c.intended_label);
        ids.push_back(c.id);
    }

    auto quality_mean = [&](const std::vector<std::size_t>& idxs) -> std::optional<double> {
        double s = 0.0;
        long n = 0;
        for (std::size_t i : idxs) {
            const auto it = quality_by_claim.find(ids[i]);
            if (it == quality_by_claim.end()) continue;
            for (int q : it->second) {
                s += q;
                ++n;
            }
        }
        if (!n) return std::nullopt;
        return s / double(n);
    };

    std::vector<GenerationReportRow> rows;
    std::vector<std::size_t> everything;
    for (int cls = 0; cls < 3; ++cls) {
        std::vector<std::size_t> idxs;
        for (std::size_t i = 0; i < golds.size(); ++i)
            if (static_cast<int>(golds[i]) == cls) idxs.push_back(i);
        GenerationReportRow row;
        row.label = label_short(static_cast<Label>(cls));
        row.n_examples = static_cast<int>(idxs.size());
        if (!idxs.empty()) {
            ConfusionMatrix cm;
            for (std::size_t i : idxs) cm.add(golds[i], preds[i]);
            row.f1 = class_f1(cm, cls);
            row.avg_quality = quality_mean(idxs);
        }
        rows.push_back(std::move(row));
        everything.insert(everything.end(), idxs.begin(), idxs.end());
    }

    GenerationReportRow overall;
    overall.label = "Overall";
    overall.n_examples = static_cast<int>(golds.size());
    if (!golds.empty()) {
        overall.f1 = macro_f1(preds, golds);
        overall.avg_quality = quality_mean(everything);
    }
    rows.push_back(std::move(overall));
    return rows;
}

namespace {

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "—";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

} // namespace

std::string render_generation_report(const std::vector<GenerationReportRow>& rows) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %8s %10s %10s\n", "Class", "F1", "Quality", "Examples");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-10s %8s %10s %10d\n", r.label.c_str(),
                      fmt_opt(r.f1).c_str(), fmt_opt(r.avg_quality).c_str(), r.n_examples);
        out += buf;
    }
    return out;
}

std::string generation_report_json(const std::vector<GenerationReportRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        json j;
        j["label"] = r.label;
        j["f1"] = r.f1 ? json(*r.f1) : json(nullptr);
        j["avg_quality"] = r.avg_quality ? json(*r.avg_quality) : json(nullptr);
        j["n_examples"] = r.n_examples;
        arr.push_back(std::move(j));
    }
    json j;
    j["rows"] = std::move(arr);
    return j.dump(2) + "\n";
}

} // namespace uat
