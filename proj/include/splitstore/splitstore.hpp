// Copyright (c) 2026 The splitstore Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "splitstore/bigint.hpp"
#include "splitstore/bytes.hpp"
#include "splitstore/channel.hpp"
#include "splitstore/codec.hpp"
#include "splitstore/consumer.hpp"
#include "splitstore/harness.hpp"
#include "splitstore/keyderive.hpp"
#include "splitstore/ledger.hpp"
#include "splitstore/message.hpp"
#include "splitstore/modmath.hpp"
#include "splitstore/net.hpp"
#include "splitstore/owner.hpp"
#include "splitstore/sha3.hpp"
#include "splitstore/storage_x.hpp"
#include "splitstore/storage_y.hpp"
