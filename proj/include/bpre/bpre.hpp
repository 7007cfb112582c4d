#pragma once

#include "bpre/error.hpp"
#include "bpre/offspring.hpp"
#include "bpre/rng.hpp"
#include "bpre/process.hpp"
#include "bpre/enumeration.hpp"
#include "bpre/bounds.hpp"
#include "bpre/intervals.hpp"
#include "bpre/harness.hpp"
#include "bpre/io.hpp"
