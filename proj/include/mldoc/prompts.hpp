#pragma once

#include <string_view>

// Prompt templates compiled in from assets/prompts/<version>/.
namespace mldoc::prompts {

std::string_view version();
std::string_view mdoc2query();
std::string_view mdoc2query_page_context();
std::string_view response();
std::string_view response_page_context();
std::string_view evaluation();

}  // namespace mldoc::prompts
