#!/usr/bin/env node
// SMT-LIB 2 pipe driver around the z3 WebAssembly build (npm: z3-solver).
// Reads a full script on stdin, prints solver output on stdout.
const fs = require('fs');
(async () => {
  const { init } = require('z3-solver');
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  const input = fs.readFileSync(0, 'utf8');
  try {
    const out = await Z3.eval_smtlib2_string(ctx, input);
    process.stdout.write(out);
  } catch (e) {
    process.stdout.write(`(error "${String(e).replace(/"/g, "'")}")\n`);
    process.exitCode = 1;
  }
  process.exit();
})();
