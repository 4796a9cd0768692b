#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uat/corpus.hpp"
#include "uat/encoder.hpp"
#include "uat/task_models.hpp"

namespace uat {

const char* label_short(Label l); // S / R / NEI

struct AttackDirection {
    Label source = Label::SUPPORTS;
    Label target = Label::REFUTES;

    std::string name() const;
    bool operator==(const AttackDirection&) const = default;
};

AttackDirection make_direction(Label source, Label target); // validates source != target
AttackDirection direction_from_string(std::string_view s);  // "S->R", "NEI->S", ...
const std::vector<AttackDirection>& all_directions();       // all six, report row order

enum class ObjectiveMode : int { FC = 0, FC_STS = 1 };
const char* to_string(ObjectiveMode m);
ObjectiveMode mode_from_string(std::string_view s);

struct TriggerState {
    int token_id = -1;
    AttackDirection direction;
    int epoch = 0;
    ObjectiveMode mode = ObjectiveMode::FC;
};

struct CandidateScore {
    int token_id = -1;
    double fc_score = 0.0;
    double sts_score = 0.0;
    double combined = 0.0; // FC_STS mode only
};

struct TriggerSearchConfig {
    int epochs = 3;
    int top_k = 10;
    double fc_weight = 0.6;
    double sts_weight = 0.4;
    int batch_size = 4;
    std::set<int> candidate_exclusions; // default: the special token ids
};

void validate(const TriggerSearchConfig& c);
std::set<int> default_exclusions(const Vocabulary& v);

// Slot-gradient accumulation: per-batch sums, divided by the total instance
// count at the end, so the average equals the gradient over the concatenated
// batches for any slice shape.
struct GradientAccumulator {
    Eigen::VectorXd sum;
    long long batch_count = 0;
    long long instance_count = 0;

    void add_batch(const Eigen::VectorXd& batch_sum_grad, int n_instances);
    Eigen::VectorXd average() const; // requires batch_count >= 1
};

// FC-side gradient of the target-class loss at the trigger slot (position 0
// of [trigger] claim [SEP] evidence), batched over the slice.
GradientAccumulator accumulate_gradients(const FactCheckModel& fc,
                                         const std::vector<ClaimInstance>& slice,
                                         const TriggerState& trigger, int batch_size);

// STS-side gradient of L' between each claim and its triggered form.
GradientAccumulator accumulate_sts_gradients(const StsModel& sts,
                                             const std::vector<ClaimInstance>& slice,
                                             const TriggerState& trigger, int batch_size);

// score[i] = (table.row(i) - trigger_emb) . grad for every vocabulary token.
std::vector<double> taylor_scores(const Eigen::VectorXd& grad, const Eigen::VectorXd& trigger_emb,
                                  const Eigen::MatrixXd& table);

// Min-max normalize both vectors to [0,1] (constant -> zeros), then weight.
std::vector<double> combine_objectives(const std::vector<double>& fc_scores,
                                       const std::vector<double>& sts_scores,
                                       const TriggerSearchConfig& config);

struct AttackModels {
    const FactCheckModel* fc = nullptr;
    const StsModel* sts = nullptr; // required in FC_STS mode
};

// Per-candidate Taylor scores around the current trigger (full |V| vectors).
struct EpochScores {
    std::vector<double> fc;
    std::vector<double> sts;      // FC_STS mode only (empty otherwise)
    std::vector<double> key;      // ranking key: fc or combined
};
EpochScores epoch_candidate_scores(const TriggerState& state, const AttackModels& models,
                                   const std::vector<ClaimInstance>& slice,
                                   const TriggerSearchConfig& config);

// One refinement step: argmin of the key over non-excluded candidates
// (current trigger excluded), ties to the lowest token id.
TriggerState epoch_update(const TriggerState& state, const AttackModels& models,
                          const std::vector<ClaimInstance>& slice,
                          const TriggerSearchConfig& config);

struct RankedTrigger {
    std::string token;
    double improvement = 0.0; // realized held-out improvement vs no trigger
};

struct RankedTriggers {
    AttackDirection direction;
    ObjectiveMode mode = ObjectiveMode::FC;
    std::vector<RankedTrigger> entries;
    std::uint64_t seed = 0;
    TriggerSearchConfig config;
};

RankedTriggers search_triggers(AttackDirection direction, ObjectiveMode mode,
                               const AttackModels& models, const Dataset& dataset,
                               const TriggerSearchConfig& config, std::uint64_t seed);

// Exact target-class loss for every vocabulary token inserted at `position`
// of the claim, averaged over the slice; ascending, ties by token id.
std::vector<std::pair<int, double>> brute_force_ranking(const FactCheckModel& fc,
                                                        const std::vector<ClaimInstance>& slice,
                                                        AttackDirection direction, int position);

ClaimInstance apply_trigger(const ClaimInstance& instance, std::string_view trigger_token);

void save_triggers(const RankedTriggers& t, const std::string& path);
RankedTriggers load_triggers(const std::string& path);

} // namespace uat
