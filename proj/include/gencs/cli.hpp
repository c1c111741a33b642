#pragma once

namespace gencs {

/// Entry point of the `gencs` tool. Exit codes: 0 success, 2 usage or
/// configuration error, 3 stage failure.
int cli_main(int argc, char** argv);

}  // namespace gencs
