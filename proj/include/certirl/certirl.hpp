#pragma once

#include "certirl/adversary.hpp"
#include "certirl/certify.hpp"
#include "certirl/decide.hpp"
#include "certirl/envs/cartpole.hpp"
#include "certirl/envs/collision_avoidance.hpp"
#include "certirl/envs/episode.hpp"
#include "certirl/errors.hpp"
#include "certirl/harness/config.hpp"
#include "certirl/harness/experiment.hpp"
#include "certirl/harness/output.hpp"
#include "certirl/netio.hpp"
#include "certirl/oracle.hpp"
#include "certirl/rng.hpp"
#include "certirl/verify.hpp"
