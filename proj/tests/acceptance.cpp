// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Training-based criteria share artifacts through --workdir.
#include <cstdio>
#include <string>

int main(int argc, char** argv) {
    std::string workdir = "acceptance_work";
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--workdir") workdir = argv[i + 1];
    std::printf("acceptance suite placeholder (workdir %s)\n", workdir.c_str());
    return 1;  // not implemented yet
}
