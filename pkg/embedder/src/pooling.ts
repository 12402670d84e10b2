// Mean pooling over final-layer token states, masked so padding positions
// contribute nothing. tokenStates is row-major [seqLen][hidden].

export function meanPool(tokenStates: Float32Array[], attentionMask: number[]): Float64Array {
  if (tokenStates.length === 0) {
    throw new Error("cannot pool zero token states");
  }
  if (tokenStates.length !== attentionMask.length) {
    throw new Error(`mask length ${attentionMask.length} != token count ${tokenStates.length}`);
  }
  const hidden = tokenStates[0].length;
  const sum = new Float64Array(hidden);
  let kept = 0;
  for (let t = 0; t < tokenStates.length; t++) {
    if (!attentionMask[t]) {
      continue;
    }
    const row = tokenStates[t];
    if (row.length !== hidden) {
      throw new Error("ragged token states");
    }
    for (let d = 0; d < hidden; d++) {
      sum[d] += row[d];
    }
    kept += 1;
  }
  if (kept === 0) {
    throw new Error("attention mask keeps no tokens");
  }
  for (let d = 0; d < hidden; d++) {
    sum[d] /= kept;
  }
  return sum;
}
