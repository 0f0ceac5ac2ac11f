#include "trajviz/pipeline.hpp"

#include <iostream>

extern char** environ;

int main(int argc, char** argv) {
  std::map<std::string, std::string> env;
  for (char** e = environ; *e; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("TRAJVIZ_")) continue;
    auto eq = kv.find('=');
    if (eq != std::string_view::npos) env.emplace(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return trajviz::run_cli({argv + 1, argv + argc}, env, std::cout, std::cerr);
}
