#pragma once

#include <cstdint>
#include <string>

#include "uat/encoder.hpp"
#include "uat/task_models.hpp"
#include "uat/trigger_search.hpp"

namespace uat {

struct ModelHyper {
    int embed_dim = 16;
    int hidden_dim = 24;
    TrainHyper train; // seed field is ignored; streams derive from the global seed
};

// Everything a run needs. JSON file, every key optional; flags may override
// seed and out_dir afterwards.
struct RunConfig {
    std::uint64_t seed = 7;
    std::string out_dir = "runs/toy";

    // Corpus: explicit JSONL path, else a synthesized template corpus.
    std::string corpus_path;
    int synth_per_class = 150;
    int synth_vocab_size = 120;

    // FC/NLI want the long schedule: marker weights keep separating long
    // after accuracy saturates, and the attack needs that separation.
    ModelHyper fc{16, 24, {0.1, 8, 240, 0}};
    ModelHyper sts{16, 24, {0.1, 8, 40, 0}};
    ModelHyper nli{16, 24, {0.1, 8, 240, 0}};
    ModelHyper lm{16, 24, {0.1, 8, 60, 0}}; // fluency LM, also the generator architecture
    int lm_context_window = 48;
    TrainHyper generator_train{0.1, 4, 20, 0}; // fine-tuning schedule for the per-class generators

    TriggerSearchConfig attack; // candidate_exclusions filled from the vocab at run time

    SamplingParams sampling; // seed field ignored; derived per evidence item
    int evidence_per_direction = 10;

    std::string annotations_path; // optional quality annotations for the generation report

    int oracle_enumeration_cap = 500;
    int oracle_runs = 20;
    int oracle_slice_size = 50;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
void validate(const RunConfig& c);

// Artifact locations under out_dir.
struct RunPaths {
    std::string dir;

    std::string corpus_train() const { return dir + "/corpus_train.jsonl"; }
    std::string corpus_dev() const { return dir + "/corpus_dev.jsonl"; }
    std::string fc_ckpt() const { return dir + "/fc.ckpt.json"; }
    std::string sts_ckpt() const { return dir + "/sts.ckpt.json"; }
    std::string nli_ckpt() const { return dir + "/nli.ckpt.json"; }
    std::string lm_ckpt() const { return dir + "/lm.ckpt.json"; }
    std::string gen_ckpt(Label c) const;
    std::string train_metrics() const { return dir + "/train_metrics.json"; }
    std::string triggers(ObjectiveMode m, AttackDirection d) const;
    std::string attack_report_txt(ObjectiveMode m) const;
    std::string attack_report_json(ObjectiveMode m) const;
    std::string claims(ObjectiveMode m) const;
    std::string generation_report_txt(ObjectiveMode m) const;
    std::string generation_report_json(ObjectiveMode m) const;
    std::string oracle_report() const { return dir + "/oracle_report.json"; }
};

} // namespace uat
