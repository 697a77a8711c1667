#include "mkp/data/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace mkp {

Words tokenize(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lowered);
  Words out;
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

Words normalize_keyphrase(std::string_view text) {
  Words words = tokenize(text);
  if (!words.empty() && words.front().size() > 1 && words.front().front() == '#') {
    words.front().erase(0, 1);
  } else if (!words.empty() && words.front() == "#") {
    words.erase(words.begin());
  }
  return words;
}

std::string join(const Words& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

}  // namespace mkp
