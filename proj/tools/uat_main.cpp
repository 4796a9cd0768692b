#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uat/commands.hpp"
#include "uat/error.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::string mode = "FC";
    std::vector<std::string> directions;
};

void add_base(CLI::App* sc, CommonFlags& f) {
    sc->add_option("--config", f.config, "JSON run config file");
    sc->add_option("--seed", f.seed, "global seed (overrides config)");
    sc->add_option("--out", f.out, "output directory (overrides config)");
}

void add_attack_flags(CLI::App* sc, CommonFlags& f) {
    sc->add_option("--direction", f.directions,
                   "direction filter, e.g. S->R (repeatable; default all six)");
    sc->add_option("--mode", f.mode, "objective: FC or FC_STS");
}

uat::RunConfig resolve(const CLI::App* sc, const CommonFlags& f) {
    uat::RunConfig cfg =
        f.config.empty() ? uat::default_run_config() : uat::load_run_config(f.config);
    if (sc->count("--seed")) cfg.seed = f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

std::vector<uat::AttackDirection> parse_directions(const std::vector<std::string>& strs) {
    std::vector<uat::AttackDirection> out;
    for (const auto& s : strs) out.push_back(uat::direction_from_string(s));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal adversarial trigger search and claim generation"};
    app.require_subcommand(1);

    CommonFlags f;
    CLI::App* train = app.add_subcommand("train", "train task models and generators");
    add_base(train, f);
    CLI::App* attack = app.add_subcommand("attack", "search triggers and write the attack report");
    add_base(attack, f);
    add_attack_flags(attack, f);
    CLI::App* generate =
        app.add_subcommand("generate", "sample and prune adversarial claims from triggers");
    add_base(generate, f);
    add_attack_flags(generate, f);
    CLI::App* evaluate = app.add_subcommand("evaluate", "recompute reports from artifacts");
    add_base(evaluate, f);
    add_attack_flags(evaluate, f);
    CLI::App* oracle =
        app.add_subcommand("oracle-check", "brute-force vs Taylor agreement report");
    add_base(oracle, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*train) {
            uat::cmd_train(resolve(train, f));
        } else if (*attack) {
            uat::cmd_attack(resolve(attack, f), parse_directions(f.directions),
                            uat::mode_from_string(f.mode));
        } else if (*generate) {
            uat::cmd_generate(resolve(generate, f), parse_directions(f.directions),
                              uat::mode_from_string(f.mode));
        } else if (*evaluate) {
            uat::cmd_evaluate(resolve(evaluate, f), parse_directions(f.directions),
                              uat::mode_from_string(f.mode));
        } else if (*oracle) {
            uat::cmd_oracle_check(resolve(oracle, f));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return uat::exit_code_for(e);
    }
    return 0;
}
