/** Scores are displayed with exactly six decimal places, verbatim from the API value. */
export function formatScore(score: number): string {
  return score.toFixed(6);
}
