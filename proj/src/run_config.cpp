#include "uat/run_config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"

namespace uat {

using nlohmann::json;

RunConfig default_run_config() { return RunConfig{}; }

namespace {

void read_train(const json& j, TrainHyper& h) {
    if (j.contains("lr")) h.lr = j.at("lr").get<double>();
    if (j.contains("batch_size")) h.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) h.epochs = j.at("epochs").get<int>();
}

void read_model(const json& j, ModelHyper& m) {
    if (j.contains("embed_dim")) m.embed_dim = j.at("embed_dim").get<int>();
    if (j.contains("hidden_dim")) m.hidden_dim = j.at("hidden_dim").get<int>();
    read_train(j, m.train);
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }

    RunConfig c = default_run_config();
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("corpus")) {
            const auto& jc = j.at("corpus");
            if (jc.contains("path")) c.corpus_path = jc.at("path").get<std::string>();
            if (jc.contains("per_class")) c.synth_per_class = jc.at("per_class").get<int>();
            if (jc.contains("vocab_size")) c.synth_vocab_size = jc.at("vocab_size").get<int>();
        }
        if (j.contains("models")) {
            const auto& jm = j.at("models");
            if (jm.contains("fc")) read_model(jm.at("fc"), c.fc);
            if (jm.contains("sts")) read_model(jm.at("sts"), c.sts);
            if (jm.contains("nli")) read_model(jm.at("nli"), c.nli);
            if (jm.contains("lm")) {
                read_model(jm.at("lm"), c.lm);
                if (jm.at("lm").contains("context_window"))
                    c.lm_context_window = jm.at("lm").at("context_window").get<int>();
            }
            if (jm.contains("generator")) read_train(jm.at("generator"), c.generator_train);
        }
        if (j.contains("attack")) {
            const auto& ja = j.at("attack");
            if (ja.contains("epochs")) c.attack.epochs = ja.at("epochs").get<int>();
            if (ja.contains("top_k")) c.attack.top_k = ja.at("top_k").get<int>();
            if (ja.contains("fc_weight")) c.attack.fc_weight = ja.at("fc_weight").get<double>();
            if (ja.contains("sts_weight")) c.attack.sts_weight = ja.at("sts_weight").get<double>();
            if (ja.contains("batch_size")) c.attack.batch_size = ja.at("batch_size").get<int>();
        }
        if (j.contains("sampling")) {
            const auto& js = j.at("sampling");
            if (js.contains("temperature")) c.sampling.temperature = js.at("temperature").get<double>();
            if (js.contains("max_length")) c.sampling.max_length = js.at("max_length").get<int>();
            if (js.contains("num_samples")) c.sampling.num_samples = js.at("num_samples").get<int>();
        }
        if (j.contains("generation")) {
            const auto& jg = j.at("generation");
            if (jg.contains("evidence_per_direction"))
                c.evidence_per_direction = jg.at("evidence_per_direction").get<int>();
        }
        if (j.contains("annotations_path"))
            c.annotations_path = j.at("annotations_path").get<std::string>();
        if (j.contains("oracle")) {
            const auto& jo = j.at("oracle");
            if (jo.contains("enumeration_cap"))
                c.oracle_enumeration_cap = jo.at("enumeration_cap").get<int>();
            if (jo.contains("runs")) c.oracle_runs = jo.at("runs").get<int>();
            if (jo.contains("slice_size")) c.oracle_slice_size = jo.at("slice_size").get<int>();
        }
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    validate(c);
    return c;
}

void validate(const RunConfig& c) {
    if (c.out_dir.empty()) throw ConfigError("out_dir must be set");
    if (c.corpus_path.empty()) {
        if (c.synth_per_class < 1) throw ConfigError("corpus.per_class must be >= 1");
        if (c.synth_vocab_size < 50) throw ConfigError("corpus.vocab_size must be >= 50");
    }
    for (const ModelHyper* m : {&c.fc, &c.sts, &c.nli, &c.lm}) {
        if (m->embed_dim < 1 || m->hidden_dim < 1)
            throw ConfigError("model dims must be >= 1");
        if (m->train.lr <= 0.0) throw ConfigError("learning rate must be > 0");
        if (m->train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (m->train.epochs < 0) throw ConfigError("epochs must be >= 0");
    }
    if (c.lm_context_window < 2) throw ConfigError("context_window must be >= 2");
    if (c.generator_train.lr <= 0.0) throw ConfigError("generator learning rate must be > 0");
    if (c.generator_train.batch_size < 1) throw ConfigError("generator batch_size must be >= 1");
    if (c.generator_train.epochs < 0) throw ConfigError("generator epochs must be >= 0");
    uat::validate(c.attack);
    if (!(c.sampling.temperature > 0.0)) throw ConfigError("sampling temperature must be > 0");
    if (c.sampling.max_length < 1) throw ConfigError("sampling max_length must be >= 1");
    if (c.sampling.num_samples < 1) throw ConfigError("sampling num_samples must be >= 1");
    if (c.evidence_per_direction < 1) throw ConfigError("evidence_per_direction must be >= 1");
    if (c.oracle_enumeration_cap < 1) throw ConfigError("oracle enumeration cap must be >= 1");
    if (c.oracle_runs < 1) throw ConfigError("oracle runs must be >= 1");
    if (c.oracle_slice_size < 1) throw ConfigError("oracle slice size must be >= 1");
}

namespace {

std::string dir_tag(AttackDirection d) {
    std::string n = d.name(); // e.g. "S->R"
    const auto pos = n.find("->");
    return n.substr(0, pos) + "_to_" + n.substr(pos + 2);
}

} // namespace

std::string RunPaths::gen_ckpt(Label c) const {
    return dir + "/gen_" + label_short(c) + ".ckpt.json";
}

std::string RunPaths::triggers(ObjectiveMode m, AttackDirection d) const {
    return dir + "/triggers_" + to_string(m) + "_" + dir_tag(d) + ".json";
}

std::string RunPaths::attack_report_txt(ObjectiveMode m) const {
    return dir + "/attack_report_" + std::string(to_string(m)) + ".txt";
}

std::string RunPaths::attack_report_json(ObjectiveMode m) const {
    return dir + "/attack_report_" + std::string(to_string(m)) + ".json";
}

std::string RunPaths::claims(ObjectiveMode m) const {
    return dir + "/claims_" + std::string(to_string(m)) + ".jsonl";
}

std::string RunPaths::generation_report_txt(ObjectiveMode m) const {
    return dir + "/generation_report_" + std::string(to_string(m)) + ".txt";
}

std::string RunPaths::generation_report_json(ObjectiveMode m) const {
    return dir + "/generation_report_" + std::string(to_string(m)) + ".json";
}

} // namespace uat
