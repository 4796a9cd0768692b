#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "uat/claim_generation.hpp"
#include "uat/corpus.hpp"
#include "uat/task_models.hpp"
#include "uat/trigger_search.hpp"

namespace uat {

// Rows are gold, columns are predicted.
struct ConfusionMatrix {
    std::array<std::array<long, 3>, 3> counts{};

    void add(Label gold, Label pred) {
        ++counts[static_cast<int>(gold)][static_cast<int>(pred)];
    }
    long total() const;
};

ConfusionMatrix confusion(const std::vector<Label>& predictions, const std::vector<Label>& golds);

// Per-class F1 with the 0/0 -> 0 convention on precision, recall, and F1.
double class_f1(const ConfusionMatrix& cm, int cls);
double macro_f1(const ConfusionMatrix& cm);
double macro_f1(const std::vector<Label>& predictions, const std::vector<Label>& golds);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0; // population
};

MeanStd mean_std(const std::vector<double>& values);

struct AttackReportRow {
    std::string label; // "baseline", a direction name, or "All"
    MeanStd f1, sts, ppl;
    int n_triggers = 0;
};

struct AttackReport {
    ObjectiveMode mode = ObjectiveMode::FC;
    AttackReportRow baseline;
    std::vector<AttackReportRow> directions;
    bool has_all = false;
    AttackReportRow all;
    // Untriggered macro-F1 of the source-class slice, per direction (the
    // apples-to-apples reference for the per-direction rows).
    std::vector<std::pair<std::string, double>> direction_baseline_f1;
};

// Per trigger: F1 / STS / PPL over the triggered source-class slice; rows
// aggregate mean +/- population std over that direction's triggers. The All
// row pools the per-trigger values of every direction.
AttackReport attack_report(const FactCheckModel& fc, const StsModel& sts, const ConditionalLm& lm,
                           const std::vector<RankedTriggers>& triggers, const Dataset& dataset);

std::string render_attack_report(const AttackReport& r);
std::string attack_report_json(const AttackReport& r);

struct GenerationReportRow {
    std::string label; // class short name or "Overall"
    std::optional<double> f1;
    std::optional<double> avg_quality;
    int n_examples = 0;
};

struct QualityAnnotation {
    std::string claim_id;
    int quality = 0; // 1..5
    Label label = Label::SUPPORTS;
};

std::vector<QualityAnnotation> load_annotations(const std::string& path);

// Class rows carry the intended class's F1 component over that class's kept
// claims; Overall is the macro-F1 over all kept claims pooled.
std::vector<GenerationReportRow> generation_report(
    const FactCheckModel& fc, const std::vector<GeneratedClaim>& kept_claims, const Dataset& dataset,
    const std::vector<QualityAnnotation>* annotations = nullptr);

std::string render_generation_report(const std::vector<GenerationReportRow>& rows);
std::string generation_report_json(const std::vector<GenerationReportRow>& rows);

} // namespace uat
