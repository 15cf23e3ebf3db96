/** Compute where the caret should land after `before` is replaced wholesale
 * by `after` (e.g. when the server rewrites the document to add a solver
 * hint). The single edited region is located via the longest common prefix
 * and suffix; carets outside it keep their anchored position, carets inside
 * it land at the end of the replacement.
 */
export function preserveCursor(before: string, after: string, cursor: number): number {
  const limit = Math.min(before.length, after.length);
  let prefix = 0;
  while (prefix < limit && before[prefix] === after[prefix]) prefix++;
  let suffix = 0;
  while (
    suffix < limit - prefix &&
    before[before.length - 1 - suffix] === after[after.length - 1 - suffix]
  ) {
    suffix++;
  }
  if (cursor <= prefix) return cursor;
  const fromEnd = before.length - cursor;
  if (fromEnd <= suffix) return after.length - fromEnd;
  return after.length - suffix;
}
