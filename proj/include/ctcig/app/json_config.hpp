#pragma once

#include <CLI11.hpp>

namespace ctcig::app {

/// CLI11 config reader for JSON files. Top-level keys set global options;
/// an object under a subcommand name sets that subcommand's options.
/// Underscores in keys match hyphens in flag names. Values given on the
/// command line win over the file.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace ctcig::app
