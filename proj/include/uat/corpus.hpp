#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace uat {

enum class Label : int { SUPPORTS = 0, REFUTES = 1, NEI = 2 };

const char* to_string(Label l);
// Case-insensitive; "NOT ENOUGH INFO" and "NEI" both map to NEI.
Label label_from_string(std::string_view s);

enum class Split : int { train = 0, dev = 1, test = 2 };

struct ClaimInstance {
    std::string id;
    std::string claim;    // original text preserved
    std::string evidence; // original text preserved
    Label label = Label::SUPPORTS;

    bool operator==(const ClaimInstance&) const = default;
};

struct Dataset {
    std::string name;
    Split split = Split::train;
    std::vector<ClaimInstance> instances;
};

struct ClassCounts {
    std::int64_t supports = 0;
    std::int64_t refutes = 0;
    std::int64_t nei = 0;

    std::int64_t total() const { return supports + refutes + nei; }
    bool operator==(const ClassCounts&) const = default;
};

// One JSON object per line, keys exactly {id, claim, evidence, label}.
Dataset load_jsonl(const std::string& path);
void write_jsonl(const Dataset& d, const std::string& path);

// Templated toy corpus. Every claim opens with a marker drawn from its
// class's slice and the label is decidable from that marker alone:
//   SUPPORTS  support marker + restated evidence,
//   REFUTES   refute marker + restated evidence,
//   NEI       NEI marker + off-evidence content words.
// Claims led by a frequent ("hot") marker are verbose (marker + content +
// a fixed filler tail); claims led by a rare marker are the bare marker.
// Deterministic in (seed, size_per_class, vocab_size).
Dataset synthesize_toy_corpus(std::uint64_t seed, int size_per_class, int vocab_size);

ClassCounts class_counts(const Dataset& d);

std::vector<ClaimInstance> instances_with_label(const Dataset& d, Label l);

} // namespace uat
