#include <string>
#include <vector>

#include "acil/cli.hpp"

int main(int argc, char** argv) {
  return acil::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
