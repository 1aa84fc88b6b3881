// Line chart of the first few simulated bubble paths from a trajectory CSV.
//
//   node dist/plot_trajectories.js --in run/trajectories_sf2.2.csv \
//        --out fig2.svg [--n-show 5] [--title "..."]

import { writeFileSync } from 'fs'
import { parseFlags, requireFlag } from './args.js'
import { EmptyInputError, SchemaError, trajectorySeries } from './csv.js'
import { lineChart } from './svg.js'

export function render(input: string, nShow: number, title?: string): string {
  const series = trajectorySeries(input, nShow)
  const name = (input.split('/').pop() ?? input)
    .replace(/^trajectories_/, '').replace(/\.csv$/, '')
  return lineChart(series, {
    title: title ?? `Simulated bubble trajectories (${name})`,
    xLabel: 't',
    yLabel: 'beta_t',
    legend: series.length > 1,
  })
}

function main(): void {
  const flags = parseFlags(process.argv.slice(2))
  const input = requireFlag(flags, 'in')
  const output = requireFlag(flags, 'out')
  const nShow = Number(flags.get('n-show') ?? '5')
  try {
    writeFileSync(output, render(input, nShow, flags.get('title')))
    console.log(`wrote ${output}`)
  } catch (err) {
    if (err instanceof SchemaError || err instanceof EmptyInputError) {
      console.error(`error: ${err.message}`)
      process.exit(1)
    }
    throw err
  }
}

if (process.argv[1] && process.argv[1].endsWith('plot_trajectories.js')) {
  main()
}
