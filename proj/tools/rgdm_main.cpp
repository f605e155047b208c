#include <string>
#include <vector>

#include "rgdm/cli.hpp"

int main(int argc, char** argv) {
    return rgdm::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
