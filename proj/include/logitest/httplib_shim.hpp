#pragma once

// Single include point for cpp-httplib so compile-time knobs stay uniform
// across every translation unit that talks HTTP.

#ifndef CPPHTTPLIB_REDIRECT_MAX_COUNT
#define CPPHTTPLIB_REDIRECT_MAX_COUNT 3
#endif

#include <httplib.h>
