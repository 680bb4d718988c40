#include <bioage/cli/commands.hpp>

int main(int argc, char** argv)
{
    return bioage::cli::run(argc, argv);
}
