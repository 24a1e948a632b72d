#pragma once
// Command-line front end. Every invocation rebuilds state from the event log
// named by --state (or the config), runs one subcommand and appends its
// events to the same log.

#include <iosfwd>
#include <string>
#include <vector>

namespace clpde {

// `args` excludes the program name. Returns the process exit code: 0 on
// success, 2 on I/O errors, 1 on every other error (including usage errors).
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clpde
