import matplotlib.pyplot as plt

states = ["TX", "AL"]
population = [29, 5]
fig, ax = plt.subplots()
bars = ax.bar(states, population)
ax.bar_label(bars)
ax.set_title("State Populations")
ax.set_xlabel("State")
ax.set_ylabel("Population")
fig.savefig("chart.png", bbox_inches='tight')
fig.clf()
