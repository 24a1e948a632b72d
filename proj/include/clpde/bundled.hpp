#pragma once
// Data files shipped under data/, compiled into the library.

#include <string_view>

namespace clpde::bundled {

std::string_view concepts_json();
std::string_view lexicon_json();
std::string_view rules_json();
std::string_view corpus_jsonl();
std::string_view config_json();

}  // namespace clpde::bundled
