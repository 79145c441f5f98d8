#pragma once

// Convenience umbrella: the whole attack engine.

#include "advig/attack.hpp"
#include "advig/detector.hpp"
#include "advig/error.hpp"
#include "advig/eval.hpp"
#include "advig/geometry.hpp"
#include "advig/imaging.hpp"
#include "advig/optimizer.hpp"
#include "advig/remote.hpp"
#include "advig/run_store.hpp"
#include "advig/version.hpp"
