#include <vector>

#include "netregime/cli.hpp"

int main(int argc, char** argv) {
  return netregime::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
