#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace uat {

// Whitespace tokenizer. Tokens are whatever sits between runs of blanks;
// original strings are kept verbatim elsewhere, this is only a view of them.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& tokens, std::string_view sep);

// Whole-token containment: `tok` equals one of tokenize(text)'s elements.
bool contains_whole_token(std::string_view text, std::string_view tok);

} // namespace uat
