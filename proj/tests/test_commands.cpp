#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uat/claim_generation.hpp"
#include "uat/commands.hpp"
#include "uat/error.hpp"
#include "uat/evaluation.hpp"

using namespace uat;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// small, fast variant of the default run
RunConfig mini_config(const std::string& out_dir) {
    RunConfig c = default_run_config();
    c.seed = 5;
    c.out_dir = out_dir;
    c.synth_per_class = 80;
    c.synth_vocab_size = 64;
    c.fc = {12, 16, {0.1, 8, 160, 0}};
    c.sts = {12, 16, {0.1, 8, 25, 0}};
    c.nli = {12, 16, {0.1, 8, 160, 0}};
    c.lm = {12, 16, {0.1, 8, 30, 0}};
    c.generator_train = {0.1, 4, 10, 0};
    c.sampling.max_length = 8;
    c.sampling.num_samples = 4;
    c.evidence_per_direction = 3;
    c.oracle_runs = 2;
    c.oracle_slice_size = 12;
    c.oracle_enumeration_cap = 200;
    return c;
}

} // namespace

TEST_CASE("run config validation") {
    RunConfig c = default_run_config();
    CHECK_NOTHROW(validate(c));

    c.out_dir.clear();
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_run_config();
    c.synth_vocab_size = 49;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.corpus_path = "whatever.jsonl"; // synth limits only apply without a corpus path
    CHECK_NOTHROW(validate(c));
    c = default_run_config();
    c.fc.train.lr = 0.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_run_config();
    c.lm_context_window = 1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_run_config();
    c.attack.top_k = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_run_config();
    c.sampling.num_samples = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_run_config();
    c.oracle_slice_size = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config files override selectively and inherit the rest") {
    const std::string path = "/tmp/uat_test_cfg.json";
    {
        std::ofstream out(path);
        out << R"({
            "seed": 99,
            "out_dir": "/tmp/uat_cfg_run",
            "corpus": {"per_class": 33},
            "models": {"fc": {"epochs": 12, "embed_dim": 10}},
            "attack": {"top_k": 4},
            "sampling": {"max_length": 9}
        })";
    }
    const RunConfig c = load_run_config(path);
    CHECK(c.seed == 99);
    CHECK(c.out_dir == "/tmp/uat_cfg_run");
    CHECK(c.synth_per_class == 33);
    CHECK(c.fc.train.epochs == 12);
    CHECK(c.fc.embed_dim == 10);
    CHECK(c.attack.top_k == 4);
    CHECK(c.sampling.max_length == 9);

    // untouched keys keep the library defaults
    const RunConfig d = default_run_config();
    CHECK(c.synth_vocab_size == d.synth_vocab_size);
    CHECK(c.fc.hidden_dim == d.fc.hidden_dim);
    CHECK(c.fc.train.lr == d.fc.train.lr);
    CHECK(c.nli.train.epochs == d.nli.train.epochs);
    CHECK(c.sts.train.epochs == d.sts.train.epochs);
    CHECK(c.generator_train.epochs == d.generator_train.epochs);
    CHECK(c.lm_context_window == d.lm_context_window);
    CHECK(c.attack.epochs == d.attack.epochs);
    CHECK(c.oracle_runs == d.oracle_runs);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_run_config("/tmp/uat_no_such_cfg.json"), ConfigError);
    {
        std::ofstream out(path);
        out << "{broken";
    }
    CHECK_THROWS_AS(load_run_config(path), ConfigError);
    {
        std::ofstream out(path);
        out << R"({"seed": "not a number"})";
    }
    CHECK_THROWS_AS(load_run_config(path), ConfigError);
    {
        std::ofstream out(path);
        out << R"({"corpus": {"vocab_size": 10}})";
    }
    CHECK_THROWS_AS(load_run_config(path), ConfigError); // fails validate()
    std::remove(path.c_str());
}

TEST_CASE("artifact paths are mode- and direction-tagged") {
    const RunPaths p{"/x"};
    CHECK(p.corpus_train() == "/x/corpus_train.jsonl");
    CHECK(p.fc_ckpt() == "/x/fc.ckpt.json");
    CHECK(p.gen_ckpt(Label::NEI) == "/x/gen_NEI.ckpt.json");
    CHECK(p.triggers(ObjectiveMode::FC, make_direction(Label::SUPPORTS, Label::REFUTES)) ==
          "/x/triggers_FC_S_to_R.json");
    CHECK(p.triggers(ObjectiveMode::FC_STS, make_direction(Label::NEI, Label::SUPPORTS)) ==
          "/x/triggers_FC_STS_NEI_to_S.json");
    CHECK(p.attack_report_txt(ObjectiveMode::FC) == "/x/attack_report_FC.txt");
    CHECK(p.attack_report_json(ObjectiveMode::FC_STS) == "/x/attack_report_FC_STS.json");
    CHECK(p.claims(ObjectiveMode::FC) == "/x/claims_FC.jsonl");
    CHECK(p.generation_report_txt(ObjectiveMode::FC) == "/x/generation_report_FC.txt");
    CHECK(p.oracle_report() == "/x/oracle_report.json");
}

TEST_CASE("downstream commands demand a completed train step") {
    const std::string dir = "/tmp/uat_test_cmd_empty";
    fs::remove_all(dir);
    fs::create_directories(dir);
    RunConfig c = mini_config(dir);
    const std::vector<AttackDirection> d1 = {make_direction(Label::SUPPORTS, Label::REFUTES)};
    CHECK_THROWS_AS(cmd_attack(c, d1, ObjectiveMode::FC), ConfigError);
    CHECK_THROWS_AS(cmd_generate(c, d1, ObjectiveMode::FC), ConfigError);
    CHECK_THROWS_AS(cmd_evaluate(c, d1, ObjectiveMode::FC), ConfigError);
    CHECK_THROWS_AS(cmd_oracle_check(c), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("the mini pipeline runs end to end and is reproducible") {
    const std::string dir_a = "/tmp/uat_test_cmd_a";
    const std::string dir_b = "/tmp/uat_test_cmd_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    RunConfig a = mini_config(dir_a);
    const std::vector<AttackDirection> dirs = {make_direction(Label::SUPPORTS, Label::REFUTES),
                                               make_direction(Label::NEI, Label::SUPPORTS)};

    cmd_train(a);
    const RunPaths pa{dir_a};
    for (const std::string& f :
         {pa.corpus_train(), pa.corpus_dev(), pa.fc_ckpt(), pa.sts_ckpt(), pa.nli_ckpt(),
          pa.lm_ckpt(), pa.gen_ckpt(Label::SUPPORTS), pa.gen_ckpt(Label::REFUTES),
          pa.gen_ckpt(Label::NEI), pa.train_metrics()})
        CHECK(fs::exists(f));

    const auto metrics = nlohmann::json::parse(slurp(pa.train_metrics()));
    CHECK(metrics.at("fc").at("dev_macro_f1").get<double>() >= 0.8);
    CHECK(metrics.at("nli").at("dev_macro_f1").get<double>() >= 0.8);
    CHECK(metrics.at("fc").at("best_epoch").get<int>() >= 0);
    CHECK(metrics.at("generators").contains("NEI"));

    const Dataset train = load_jsonl(pa.corpus_train());
    const ClassCounts counts = class_counts(train);
    CHECK(counts.supports == 80);
    CHECK(counts.refutes == 80);
    CHECK(counts.nei == 80);

    cmd_attack(a, dirs, ObjectiveMode::FC);
    for (const auto& d : dirs) {
        const std::string tf = pa.triggers(ObjectiveMode::FC, d);
        REQUIRE(fs::exists(tf));
        const RankedTriggers rt = load_triggers(tf);
        CHECK(rt.direction == d);
        CHECK(!rt.entries.empty());
        for (std::size_t i = 1; i < rt.entries.size(); ++i)
            CHECK(rt.entries[i].improvement <= rt.entries[i - 1].improvement);
    }
    const auto arep = nlohmann::json::parse(slurp(pa.attack_report_json(ObjectiveMode::FC)));
    CHECK(arep.at("baseline").at("sts").at("mean") == 5.0);
    CHECK(arep.at("directions").size() == 2);
    CHECK(arep.at("all").at("n_triggers").get<int>() >= 2);

    cmd_generate(a, dirs, ObjectiveMode::FC);
    REQUIRE(fs::exists(pa.claims(ObjectiveMode::FC)));
    const auto claims = read_generated_claims(pa.claims(ObjectiveMode::FC));
    // 2 directions x 3 evidence items x 4 samples
    CHECK(claims.size() == 24);
    for (const auto& c : claims) {
        const bool sr = c.id.rfind("S->R#", 0) == 0;
        const bool ns = c.id.rfind("NEI->S#", 0) == 0;
        CHECK((sr || ns));
        CHECK(c.triggers.size() == 5);
        if (c.kept) {
            CHECK(c.contains_trigger);
            CHECK(nli_to_fc(c.nli_verdict) == c.intended_label);
        }
    }
    CHECK(fs::exists(pa.generation_report_txt(ObjectiveMode::FC)));
    CHECK(fs::exists(pa.generation_report_json(ObjectiveMode::FC)));

    cmd_evaluate(a, dirs, ObjectiveMode::FC);
    const auto erep = nlohmann::json::parse(slurp(pa.attack_report_json(ObjectiveMode::FC)));
    CHECK(erep.at("direction_baseline_f1").size() == 2);

    cmd_oracle_check(a);
    REQUIRE(fs::exists(pa.oracle_report()));
    const auto orep = nlohmann::json::parse(slurp(pa.oracle_report()));
    CHECK(orep.at("linear_ordering_exact").get<bool>());
    CHECK(orep.at("per_direction_agreement").size() == 6);
    const double agr = orep.at("trained_agreement").get<double>();
    CHECK(agr >= 0.0);
    CHECK(agr <= 1.0);

    // identical seed and config reproduce byte-identical artifacts
    RunConfig b = mini_config(dir_b);
    cmd_train(b);
    cmd_attack(b, dirs, ObjectiveMode::FC);
    cmd_generate(b, dirs, ObjectiveMode::FC);
    const RunPaths pb{dir_b};
    CHECK(slurp(pa.corpus_train()) == slurp(pb.corpus_train()));
    CHECK(slurp(pa.fc_ckpt()) == slurp(pb.fc_ckpt()));
    CHECK(slurp(pa.triggers(ObjectiveMode::FC, dirs[0])) ==
          slurp(pb.triggers(ObjectiveMode::FC, dirs[0])));
    CHECK(slurp(pa.claims(ObjectiveMode::FC)) == slurp(pb.claims(ObjectiveMode::FC)));
    CHECK(slurp(pa.attack_report_json(ObjectiveMode::FC)) ==
          slurp(pb.attack_report_json(ObjectiveMode::FC)));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("an explicit corpus path is split instead of synthesized") {
    const std::string dir = "/tmp/uat_test_cmd_corpus";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string corpus = dir + "/input.jsonl";
    {
        Dataset d;
        d.name = "mini";
        const char* heads[3] = {"alpha", "beta", "gamma"};
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 4; ++i) {
                ClaimInstance inst;
                inst.id = std::string(heads[c]) + std::to_string(i);
                inst.claim = std::string(heads[c]) + " tok" + std::to_string(i);
                inst.evidence = "tok" + std::to_string(i) + " tok9";
                inst.label = static_cast<Label>(c);
                d.instances.push_back(inst);
            }
        write_jsonl(d, corpus);
    }

    RunConfig c = mini_config(dir + "/run");
    c.corpus_path = corpus;
    c.fc.train.epochs = 2;
    c.sts.train.epochs = 2;
    c.nli.train.epochs = 2;
    c.lm.train.epochs = 2;
    c.generator_train.epochs = 2;
    cmd_train(c);

    const RunPaths p{c.out_dir};
    const Dataset train = load_jsonl(p.corpus_train());
    const Dataset dev = load_jsonl(p.corpus_dev());
    CHECK(train.instances.size() == 10);
    CHECK(dev.instances.size() == 2);
    // every input instance lands in exactly one split
    std::set<std::string> ids;
    for (const auto& inst : train.instances) ids.insert(inst.id);
    for (const auto& inst : dev.instances) ids.insert(inst.id);
    CHECK(ids.size() == 12);

    RunConfig bad = c;
    bad.corpus_path = dir + "/nope.jsonl";
    CHECK_THROWS_AS(cmd_train(bad), ConfigError);
    fs::remove_all(dir);
}
