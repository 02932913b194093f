#include "neural_screen/cli.hpp"

int main(int argc, char** argv)
{
  return nscreen::run_command(argc, argv);
}
