#pragma once

#include "mkp/core/types.hpp"

#include <string>
#include <string_view>

namespace mkp {

// Lowercase + whitespace tokenization.
Words tokenize(std::string_view text);

// Keyphrase normalization: tokenize, then strip a leading '#' from the
// first word (hashtags are keyphrases).
Words normalize_keyphrase(std::string_view text);

std::string join(const Words& words, std::string_view sep = " ");

}  // namespace mkp
