#include "porodiff/app.hpp"

int main(int argc, char** argv) { return porodiff::cli_main(argc, argv); }
