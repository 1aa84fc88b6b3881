// Overlay of the zero-volatility bubble curves, one CSV per network.
//
//   node dist/plot_deterministic.js \
//        --in run/deterministic_sf2.2.csv,run/deterministic_er3.2.csv \
//        --out fig4.svg

import { writeFileSync } from 'fs'
import { parseFlags, requireFlag } from './args.js'
import { EmptyInputError, SchemaError, deterministicSeries } from './csv.js'
import { lineChart } from './svg.js'

export function render(inputs: string[], title?: string): string {
  const series = inputs.map(deterministicSeries)
  return lineChart(series, {
    title: title ?? 'Deterministic bubble evolution by network',
    xLabel: 't',
    yLabel: 'beta_t',
    legend: true,
  })
}

function main(): void {
  const flags = parseFlags(process.argv.slice(2))
  const inputs = requireFlag(flags, 'in').split(',')
  const output = requireFlag(flags, 'out')
  try {
    writeFileSync(output, render(inputs, flags.get('title')))
    console.log(`wrote ${output}`)
  } catch (err) {
    if (err instanceof SchemaError || err instanceof EmptyInputError) {
      console.error(`error: ${err.message}`)
      process.exit(1)
    }
    throw err
  }
}

if (process.argv[1] && process.argv[1].endsWith('plot_deterministic.js')) {
  main()
}
