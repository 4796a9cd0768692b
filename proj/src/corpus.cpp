#include "uat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "uat/error.hpp"
#include "uat/rng.hpp"

namespace uat {

using nlohmann::json;

const char* to_string(Label l) {
    switch (l) {
        case Label::SUPPORTS: return "SUPPORTS";
        case Label::REFUTES: return "REFUTES";
        case Label::NEI: return "NEI";
    }
    throw ValidationError("invalid label value");
}

Label label_from_string(std::string_view s) {
    std::string up;
    up.reserve(s.size());
    for (char c : s) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (up == "SUPPORTS") return Label::SUPPORTS;
    if (up == "REFUTES") return Label::REFUTES;
    if (up == "NEI" || up == "NOT ENOUGH INFO") return Label::NEI;
    throw ValidationError("unknown label: " + std::string(s));
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Dataset d;
    d.name = path;
    d.split = Split::train;
    std::set<std::string> seen_ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("claim") ||
            !obj.contains("evidence") || !obj.contains("label") || !obj["id"].is_string() ||
            !obj["claim"].is_string() || !obj["evidence"].is_string() || !obj["label"].is_string())
            throw ParseError("line " + std::to_string(lineno) +
                             ": expected string keys id, claim, evidence, label");
        ClaimInstance inst;
        inst.id = obj["id"].get<std::string>();
        inst.claim = obj["claim"].get<std::string>();
        inst.evidence = obj["evidence"].get<std::string>();
        try {
            inst.label = label_from_string(obj["label"].get<std::string>());
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (inst.claim.empty() || inst.evidence.empty())
            throw ValidationError("line " + std::to_string(lineno) + ": empty claim or evidence");
        if (!seen_ids.insert(inst.id).second)
            throw ValidationError("line " + std::to_string(lineno) + ": duplicate id " + inst.id);
        d.instances.push_back(std::move(inst));
    }
    return d;
}

void write_jsonl(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& inst : d.instances) {
        json obj;
        obj["id"] = inst.id;
        obj["claim"] = inst.claim;
        obj["evidence"] = inst.evidence;
        obj["label"] = to_string(inst.label);
        out << obj.dump() << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

namespace {

std::string slice_token(const char* prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
    return buf;
}

std::vector<std::string> make_slice(const char* prefix, int n) {
    std::vector<std::string> v;
    v.reserve(n);
    for (int i = 0; i < n; ++i) v.push_back(slice_token(prefix, i));
    return v;
}

// Two-tier marker sampling: a couple of "hot" slice members absorb a fixed
// share of the draws, so trained marker weights are uneven and a searched
// trigger can outweigh the typical per-claim marker.
struct TieredSlice {
    std::vector<std::string> tokens;
    int hot_count;
    double hot_prob;

    int draw(Rng& rng) const {
        if (rng.unit() < hot_prob) return static_cast<int>(rng.index(hot_count));
        return hot_count + static_cast<int>(rng.index(tokens.size() - hot_count));
    }
};

} // namespace

Dataset synthesize_toy_corpus(std::uint64_t seed, int size_per_class, int vocab_size) {
    if (size_per_class < 1) throw ConfigError("size_per_class must be >= 1");
    if (vocab_size < 50) throw ConfigError("vocab_size must be >= 50");

    const int n_sub = 2 * vocab_size / 16;
    const int n_vrb = 2 * vocab_size / 16;
    const int n_obj = 2 * vocab_size / 16;
    const int n_mark = 3 * vocab_size / 16; // per class
    const int n_oth = vocab_size - (n_sub + n_vrb + n_obj + 3 * n_mark);
    if (n_sub < 2 || n_vrb < 2 || n_obj < 2 || n_mark < 4 || n_oth < 2)
        throw ConfigError("vocab_size too small to satisfy slice disjointness");

    const auto sub = make_slice("sub", n_sub);
    const auto vrb = make_slice("vrb", n_vrb);
    const auto obj = make_slice("obj", n_obj);
    const auto oth = make_slice("oth", n_oth);
    const double hot_prob = 0.45;
    const int filler_count = 7;
    const int hot_count = std::min(10, n_mark / 2);
    const TieredSlice markers[3] = {
        {make_slice("sup", n_mark), hot_count, hot_prob},
        {make_slice("ref", n_mark), hot_count, hot_prob},
        {make_slice("nei", n_mark), hot_count, hot_prob},
    };

    // Round-robin marker assignment inside each tier keeps every marker
    // covered even in small corpora; the order is then shuffled.
    const auto marker_schedule = [&](Rng& r, int size) {
        std::vector<int> mis(size);
        const int n_hot = static_cast<int>(hot_prob * size);
        int hc = 0, cc = 0;
        for (int i = 0; i < size; ++i)
            mis[i] = i < n_hot ? hc++ % hot_count
                               : hot_count + cc++ % (n_mark - hot_count);
        for (int i = size - 1; i > 0; --i)
            std::swap(mis[i], mis[r.index(static_cast<std::size_t>(i) + 1)]);
        return mis;
    };

    Rng rng(derive_seed(seed, "corpus.synthesize"));
    Dataset d;
    d.name = "toy";
    d.split = Split::train;
    d.instances.reserve(3 * static_cast<std::size_t>(size_per_class));

    const Label order[3] = {Label::SUPPORTS, Label::REFUTES, Label::NEI};
    const char* tag[3] = {"S", "R", "N"};
    for (Label lab : order) {
        const int li = static_cast<int>(lab);
        const TieredSlice& own = markers[li];
        const auto mis = marker_schedule(rng, size_per_class);
        for (int i = 0; i < size_per_class; ++i) {
            const auto& s = sub[rng.index(sub.size())];
            const auto& v = vrb[rng.index(vrb.size())];
            const std::size_t oi = rng.index(obj.size());
            ClaimInstance inst;
            inst.id = std::string("toy-") + tag[li] + "-" + std::to_string(i);
            inst.evidence = s + " " + v + " " + obj[oi];
            inst.label = lab;

            const int mi = mis[i];
            std::size_t o2 = oi;
            if (lab == Label::NEI) {
                // off-evidence object for NEI claims; it always differs
                o2 = rng.index(obj.size() - 1);
                if (o2 >= oi) ++o2;
            }
            if (mi < own.hot_count) {
                // Hot markers head verbose claims: restated content plus a
                // fixed filler tail. The marker's pooled share shrinks with
                // length, so training pushes hot-marker weights well above
                // cold ones; the constant tail adds no spurious signal.
                if (lab == Label::NEI) {
                    const auto& s2 = sub[rng.index(sub.size())];
                    const auto& v2 = vrb[rng.index(vrb.size())];
                    inst.claim = own.tokens[mi] + " " + s2 + " " + v2 + " " + obj[o2];
                } else {
                    inst.claim = own.tokens[mi] + " " + inst.evidence;
                }
                for (int f = 0; f < filler_count; ++f)
                    inst.claim += " " + oth[f % oth.size()];
            } else {
                // Cold markers carry the claim alone.
                inst.claim = own.tokens[mi];
            }

            d.instances.push_back(std::move(inst));
        }
    }
    return d;
}

ClassCounts class_counts(const Dataset& d) {
    ClassCounts c;
    for (const auto& inst : d.instances) {
        switch (inst.label) {
            case Label::SUPPORTS: ++c.supports; break;
            case Label::REFUTES: ++c.refutes; break;
            case Label::NEI: ++c.nei; break;
        }
    }
    return c;
}

std::vector<ClaimInstance> instances_with_label(const Dataset& d, Label l) {
    std::vector<ClaimInstance> out;
    for (const auto& inst : d.instances)
        if (inst.label == l) out.push_back(inst);
    return out;
}

} // namespace uat
