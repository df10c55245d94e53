#pragma once

#include <string_view>

// Contents of the files under data/, compiled in so the library works without paths.
namespace cvemap::defaults {

std::string_view catalog_2022_json();
std::string_view stopwords_txt();
std::string_view gazetteer_txt();

}  // namespace cvemap::defaults
